"""Connectivity repair for superpixel labelings.

Splits every superpixel into 4-connected components, keeps the largest
component under the original id, and merges small fragments into
adjacent superpixels of the same owning object (fragments made purely
of UNCERTAIN-origin pixels may merge anywhere).  Fragments that are
large, or that have no eligible neighbor, become new superpixels.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .prior import UNCERTAIN, PriorPartition


def _same_label_components(labels):
    """4-connected components of equal-label regions; returns (n, comp)
    with comp holding a component id per pixel."""
    h, w = labels.shape
    n = h * w
    idx = np.arange(n).reshape(h, w)
    pairs = []
    eq = labels[:, :-1] == labels[:, 1:]
    pairs.append((idx[:, :-1][eq], idx[:, 1:][eq]))
    eq = labels[:-1, :] == labels[1:, :]
    pairs.append((idx[:-1, :][eq], idx[1:, :][eq]))
    a = np.concatenate([p[0] for p in pairs])
    b = np.concatenate([p[1] for p in pairs])
    graph = coo_matrix((np.ones(len(a), dtype=np.int8), (a, b)), shape=(n, n))
    return connected_components(graph, directed=False)


def _adjacent_pairs(comp2d, n_comp):
    """Counts of 4-adjacent pixel pairs between distinct components."""
    a = np.concatenate(
        [comp2d[:, :-1].ravel(), comp2d[:-1, :].ravel()]
    )
    b = np.concatenate(
        [comp2d[:, 1:].ravel(), comp2d[1:, :].ravel()]
    )
    keep = a != b
    a, b = a[keep], b[keep]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    key, counts = np.unique(lo.astype(np.int64) * n_comp + hi, return_counts=True)
    pairs = np.stack(np.divmod(key, n_comp), axis=1)
    return pairs, counts


def enforce_connectivity(labels, owners, partition: PriorPartition, min_fragment):
    """Repair a superpixel labeling into connected, densely-numbered ids.

    Args:
        labels: (H, W) integer superpixel ids (gaps allowed).
        owners: object id per superpixel id (array indexed by id).
        partition: the prior partition the labeling was built under.
        min_fragment: fragments strictly smaller than this merge into a
            neighbor; larger ones become their own superpixels.

    Returns:
        (labels, owners): dense int32 labels where every id is one
        4-connected region, and the owning object id per final id.
        Surviving original ids keep their relative order; fragment ids
        are appended.  Already-connected dense input is returned as is.
    """
    labels = np.asarray(labels)
    owners = np.asarray(owners)
    h, w = labels.shape
    n_comp, comp = _same_label_components(labels)
    comp2d = comp.reshape(h, w)
    sizes = np.bincount(comp, minlength=n_comp)
    comp_sp = np.empty(n_comp, dtype=np.int64)
    comp_sp[comp] = labels.ravel()
    uncertain = (partition.labels == UNCERTAIN).ravel()
    unc_counts = np.bincount(comp, weights=uncertain.astype(np.float64),
                             minlength=n_comp)
    pure_uncertain = unc_counts == sizes

    # Largest component of each superpixel keeps the id (ties: lowest
    # component id); the rest become provisional fragments.
    order = np.lexsort((np.arange(n_comp), -sizes, comp_sp))
    primary = np.zeros(n_comp, dtype=bool)
    first = np.ones(n_comp, dtype=bool)
    first[1:] = comp_sp[order[1:]] != comp_sp[order[:-1]]
    primary[order[first]] = True

    # Per-component current group id: primaries share their superpixel's
    # group; each fragment starts as its own group.
    n_sp = int(labels.max()) + 1
    group_of_comp = np.where(primary, comp_sp, 0).astype(np.int64)
    fragment_ids = np.nonzero(~primary)[0]
    group_of_comp[fragment_ids] = n_sp + np.arange(len(fragment_ids))
    n_groups = n_sp + len(fragment_ids)

    group_owner = np.full(n_groups, UNCERTAIN, dtype=np.int64)
    group_owner[comp_sp[primary]] = owners[comp_sp[primary]]
    group_owner[group_of_comp[fragment_ids]] = owners[comp_sp[fragment_ids]]
    group_size = np.bincount(group_of_comp, weights=sizes, minlength=n_groups)
    group_free = np.zeros(n_groups, dtype=bool)
    group_free[group_of_comp[fragment_ids]] = pure_uncertain[fragment_ids]

    # Component adjacency in CSR form, then plain-list mirrors of the
    # group state: the merge sweep is Python-level and list indexing is
    # much cheaper than numpy scalar access there.
    pairs, counts = _adjacent_pairs(comp2d, n_comp)
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    wts = np.concatenate([counts, counts])
    order = np.argsort(src, kind="stable")
    indptr = np.zeros(n_comp + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(np.bincount(src, minlength=n_comp))
    iptr = indptr.tolist()
    adj_comp = dst[order].tolist()
    adj_len = wts[order].tolist()

    gof = group_of_comp.tolist()
    parent = list(range(n_groups))
    gsize = group_size.astype(np.int64).tolist()
    gowner = group_owner.tolist()
    gfree = group_free.tolist()

    def find(g):
        while parent[g] != g:
            parent[g] = parent[parent[g]]
            g = parent[g]
        return g

    # Fragments are visited in ascending group id; a fragment that finds
    # no eligible neighbor is retried after later merges may have changed
    # its neighborhood, until a sweep makes no progress.
    pending = sorted(gof[c] for c in fragment_ids.tolist())
    group_comps = {gof[c]: [c] for c in fragment_ids.tolist()}
    while pending:
        blocked = []
        changed = False
        for g in pending:
            if parent[g] != g or gsize[g] >= min_fragment:
                continue
            neighbor_len = {}
            free, owner = gfree[g], gowner[g]
            for own_comp in group_comps[g]:
                for i in range(iptr[own_comp], iptr[own_comp + 1]):
                    og = find(gof[adj_comp[i]])
                    if og == g:
                        continue
                    if not free and gowner[og] != owner:
                        continue
                    neighbor_len[og] = neighbor_len.get(og, 0) + adj_len[i]
            if not neighbor_len:
                blocked.append(g)
                continue
            target = min(
                neighbor_len, key=lambda t: (-neighbor_len[t], t)
            )
            parent[g] = target
            gsize[target] += gsize[g]
            gfree[target] = gfree[target] and gfree[g]
            if target in group_comps:
                group_comps[target].extend(group_comps[g])
            del group_comps[g]
            changed = True
        if not changed:
            break
        pending = blocked

    roots = np.array(sorted({find(g) for g in gof}))
    dense = np.full(n_groups, -1, dtype=np.int32)
    dense[roots] = np.arange(len(roots), dtype=np.int32)
    final_of_comp = dense[[find(g) for g in gof]]
    out = final_of_comp[comp2d].astype(np.int32)
    final_owners = group_owner[roots].astype(np.int32)
    return out, final_owners
