"""Greedy agglomerative clustering of speech segments.

Merge cost between two clusters is the delta BIC of their concatenated
feature rows. While any pair of clusters has a negative cost, the cheapest
pair merges; ties break on the lowest (a, b) id pair so runs are
reproducible. Segments shorter than min_segment_frames carry too little
evidence for a stable covariance and are left out as noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .divergence import BicConfig, ComputeCounter, delta_bic
from .errors import NoSegments


@dataclass(frozen=True)
class Segment:
    start_frame: int
    end_frame: int          # exclusive
    rows: np.ndarray        # view into the feature matrix

    def __post_init__(self):
        if self.start_frame >= self.end_frame:
            raise ValueError("segment must span at least one frame")

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame

    def bounds_sec(self, hop_sec: float, frame_offset_sec: float = 0.0) -> tuple[float, float]:
        return (frame_offset_sec + self.start_frame * hop_sec,
                frame_offset_sec + self.end_frame * hop_sec)


@dataclass(frozen=True)
class ClusterSet:
    clusters: list[list[int]]                   # member segment indices, sorted
    assignments: list[int | None]               # per-segment cluster id; None = noise
    merge_trace: list[tuple[int, int, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.clusters)

    def noise_segments(self) -> list[int]:
        return [i for i, a in enumerate(self.assignments) if a is None]


def merge_cost(
    a: np.ndarray,
    b: np.ndarray,
    cfg: BicConfig | None = None,
    counter: ComputeCounter | None = None,
) -> float:
    """Delta BIC between the concatenated rows of two clusters."""
    return delta_bic(a, b, cfg or BicConfig(), counter)


def cluster_segments(
    segments: list[Segment],
    cfg: BicConfig | None = None,
    min_segment_frames: int = 25,
    counter: ComputeCounter | None = None,
) -> ClusterSet:
    """Greedily merge segment clusters while the cheapest pair attracts.

    Returns cluster membership over the eligible segments plus the ordered
    merge trace; too-short segments get assignment None.
    """
    if not segments:
        raise NoSegments("no segments to cluster")
    cfg = cfg or BicConfig()

    eligible = [i for i, s in enumerate(segments) if s.n_frames >= min_segment_frames]
    assignments: list[int | None] = [None] * len(segments)
    if not eligible:
        return ClusterSet(clusters=[], assignments=assignments, merge_trace=[])

    # stable ids: position in the eligible list; a merge keeps the lower id
    members: dict[int, list[int]] = {cid: [seg] for cid, seg in enumerate(eligible)}
    rows: dict[int, np.ndarray] = {
        cid: np.asarray(segments[seg].rows, dtype=np.float64)
        for cid, seg in enumerate(eligible)
    }
    costs: dict[tuple[int, int], float] = {}
    trace: list[tuple[int, int, float]] = []

    while len(members) >= 2:
        ids = sorted(members)
        best_pair = None
        best_cost = np.inf
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                key = (a, b)
                if key not in costs:
                    costs[key] = merge_cost(rows[a], rows[b], cfg, counter)
                c = costs[key]
                if c < best_cost:
                    best_cost, best_pair = c, key
        if best_cost >= 0.0 or best_pair is None:
            break
        a, b = best_pair
        members[a] = members[a] + members[b]
        rows[a] = np.vstack([rows[a], rows[b]])
        del members[b], rows[b]
        costs = {k: v for k, v in costs.items() if a not in k and b not in k}
        trace.append((a, b, best_cost))

    ordered = sorted(members.values(), key=lambda m: min(m))
    clusters = [sorted(m) for m in ordered]
    for label, m in enumerate(clusters):
        for seg in m:
            assignments[seg] = label
    return ClusterSet(clusters=clusters, assignments=assignments, merge_trace=trace)


def cluster_rows(segments: list[Segment], cluster: list[int]) -> np.ndarray:
    """Concatenated feature rows of one cluster's member segments."""
    return np.vstack([np.asarray(segments[i].rows, dtype=np.float64) for i in cluster])


def write_cluster_csv(path, segments: list[Segment], clusters: ClusterSet,
                      hop_sec: float, frame_offset_sec: float = 0.0) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment_start_sec", "segment_end_sec", "cluster_id"])
        for i, seg in enumerate(segments):
            start, end = seg.bounds_sec(hop_sec, frame_offset_sec)
            label = clusters.assignments[i]
            writer.writerow([f"{start:.6f}", f"{end:.6f}",
                             label if label is not None else "noise"])
