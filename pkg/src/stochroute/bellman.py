"""
One step of the arrival-probability recursion, batched over edges.

For a tail node ``i`` the update is

    new[i](t) = max over out-edges e=(i, j) of  sum_s p_e[s] * values[j][t - s]

truncated to the grid. The FFT path convolves every edge in one batch and
agrees with direct summation to ~1e-15; results are clipped to [0, 1] so
roundoff never leaves the probability range.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.fft as sfft


class BellmanOperator:
    """Max-over-successors convolution for a fixed set of edges.

    Parameters
    ----------
    n_nodes : number of (local) node slots in the value arrays.
    tails, heads : local node index of each edge; edges must be grouped by
        tail, and within a group ordered by the tie-break priority
        (smallest global head id first).
    masses : (n_edges, bins) edge PDFs on the common grid.
    method : ``"fft"`` or ``"direct"``.
    """

    def __init__(self, n_nodes: int, tails: np.ndarray, heads: np.ndarray,
                 masses: np.ndarray, method: str = "fft"):
        if method not in ("fft", "direct"):
            raise ValueError(f"unknown convolution method {method!r}")
        self.n_nodes = n_nodes
        self.tails = np.asarray(tails, dtype=np.int64)
        self.heads = np.asarray(heads, dtype=np.int64)
        self.masses = np.asarray(masses, dtype=float)
        self.bins = self.masses.shape[1]
        self.method = method
        if len(self.tails) and np.any(np.diff(self.tails) < 0):
            raise ValueError("edges must be grouped by tail")
        counts = np.bincount(self.tails, minlength=n_nodes)
        self.offsets = np.concatenate([[0], np.cumsum(counts)])
        if method == "fft":
            self.nfft = sfft.next_fast_len(2 * self.bins - 1, real=True)
            self.spectra = sfft.rfft(self.masses, self.nfft, axis=1)

    def _select(self, nodes: np.ndarray):
        starts = self.offsets[nodes]
        stops = self.offsets[nodes + 1]
        counts = stops - starts
        has_edges = counts > 0
        edge_idx = np.concatenate([np.arange(a, b) for a, b in zip(starts, stops)]) \
            if len(nodes) else np.zeros(0, dtype=np.int64)
        group_starts = np.concatenate([[0], np.cumsum(counts[has_edges])[:-1]]).astype(np.int64)
        return edge_idx.astype(np.int64), has_edges, group_starts

    def _edge_conv(self, values: np.ndarray, edge_idx, clip: bool = True) -> np.ndarray:
        """Edge-major convolutions, shape (len(edge_idx), k, bins), for stacked ``values`` (k, n, bins)."""
        L = self.bins
        heads = self.heads[edge_idx]
        if self.method == "fft":
            used, inverse = np.unique(heads, return_inverse=True)
            vh = sfft.rfft(values[:, used, :].transpose(1, 0, 2), self.nfft, axis=2)
            prod = vh[inverse]
            prod *= self.spectra[edge_idx][:, None, :]
            out = sfft.irfft(prod, self.nfft, axis=2, overwrite_x=True)[:, :, :L]
        else:
            ids = np.arange(len(self.heads))[edge_idx]
            out = np.empty((len(ids), values.shape[0], L))
            for r, (e, h) in enumerate(zip(ids, heads)):
                for f in range(values.shape[0]):
                    out[r, f] = np.convolve(self.masses[e], values[f, h])[:L]
        if clip:
            np.clip(out, 0.0, 1.0, out=out)
        return out

    def _edge_range(self, edge_idx: np.ndarray):
        """A slice when ``edge_idx`` is contiguous (avoids gathering spectra)."""
        if len(edge_idx) and edge_idx[-1] - edge_idx[0] + 1 == len(edge_idx) and np.all(np.diff(edge_idx) == 1):
            return slice(int(edge_idx[0]), int(edge_idx[-1]) + 1)
        return edge_idx

    def edge_values(self, values: np.ndarray, edge_idx: np.ndarray) -> np.ndarray:
        """Convolution of each selected edge's PDF with its head's value array.

        ``values`` may stack several value families, shape (k, n_nodes, bins);
        the result then has shape (k, len(edge_idx), bins).
        """
        values = np.asarray(values, dtype=float)
        squeeze = values.ndim == 2
        if squeeze:
            values = values[None]
        out = self._edge_conv(values, self._edge_range(np.asarray(edge_idx, dtype=np.int64)))
        out = out.transpose(1, 0, 2)
        return out[0] if squeeze else np.ascontiguousarray(out)

    def apply(self, values: np.ndarray, nodes: Sequence[int]) -> np.ndarray:
        """Updated value arrays for ``nodes`` (a node without out-edges gets 0).

        ``values`` has shape (n_nodes, bins) or (k, n_nodes, bins); the result
        drops the node axis to ``len(nodes)``.
        """
        values = np.asarray(values, dtype=float)
        squeeze = values.ndim == 2
        if squeeze:
            values = values[None]
        nodes = np.asarray(nodes, dtype=np.int64)
        edge_idx, has_edges, group_starts = self._select(nodes)
        result = np.zeros((values.shape[0], len(nodes), self.bins))
        if len(edge_idx):
            # clipping is monotone, so it commutes with the max and is applied once afterwards
            conv = self._edge_conv(values, self._edge_range(edge_idx), clip=False)
            best = np.maximum.reduceat(conv, group_starts, axis=0)
            np.clip(best, 0.0, 1.0, out=best)
            result[:, has_edges, :] = best.transpose(1, 0, 2)
        return result[0] if squeeze else result

    def argmax(self, values: np.ndarray, node: int, tie_tolerance: float = 0.0):
        """Per-bin best out-edge of ``node``: returns (edge ids, best edge per bin, best value per bin).

        Ties resolve to the earliest edge in the group, i.e. the smallest head
        id; values within ``tie_tolerance`` of the best count as ties.
        """
        a, b = int(self.offsets[node]), int(self.offsets[node + 1])
        edge_idx = np.arange(a, b, dtype=np.int64)
        if b == a:
            return edge_idx, np.full(self.bins, -1, dtype=np.int64), np.zeros(self.bins)
        conv = self._edge_conv(np.asarray(values, dtype=float)[None], slice(a, b))[:, 0]
        best = _first_best(conv, tie_tolerance)
        return edge_idx, edge_idx[best], conv[best, np.arange(self.bins)]

    def argmax_all(self, values: np.ndarray, nodes: Sequence[int], chunk_edges: int = 4096,
                   tie_tolerance: float = 0.0) -> np.ndarray:
        """Best out-edge per bin for each of ``nodes`` (-1 for nodes without out-edges).

        Same result as calling :meth:`argmax` per node, but the convolutions
        are batched.
        """
        values = np.asarray(values, dtype=float)[None]
        nodes = np.asarray(nodes, dtype=np.int64)
        out = np.full((len(nodes), self.bins), -1, dtype=np.int64)
        cols = np.arange(self.bins)
        k = 0
        while k < len(nodes):
            # take whole nodes until the edge budget of this chunk is used
            stop, edges = k, 0
            while stop < len(nodes) and (stop == k or edges + self.offsets[nodes[stop] + 1]
                                         - self.offsets[nodes[stop]] <= chunk_edges):
                edges += int(self.offsets[nodes[stop] + 1] - self.offsets[nodes[stop]])
                stop += 1
            part = nodes[k:stop]
            edge_idx, has_edges, group_starts = self._select(part)
            if len(edge_idx):
                conv = self._edge_conv(values, self._edge_range(edge_idx))[:, 0]
                group_ends = np.append(group_starts[1:], len(edge_idx))
                for r, a, b in zip(np.flatnonzero(has_edges), group_starts, group_ends):
                    out[k + r] = edge_idx[a + _first_best(conv[a:b], tie_tolerance)]
            k = stop
        return out


def _first_best(conv: np.ndarray, tie_tolerance: float) -> np.ndarray:
    """Row index of the first value within ``tie_tolerance`` of each column's maximum."""
    if tie_tolerance <= 0:
        return np.argmax(conv, axis=0)
    return np.argmax(conv >= conv.max(axis=0) - tie_tolerance, axis=0)
