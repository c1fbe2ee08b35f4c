import numpy as np
import pytest

from feddiar.clustering import (
    Segment,
    cluster_rows,
    cluster_segments,
    merge_cost,
    write_cluster_csv,
)
from feddiar.errors import NoSegments


def make_segment(start, rows):
    return Segment(start, start + rows.shape[0], rows)


def gaussian_segments(means, n_per=40, d=12, seed=0):
    rng = np.random.default_rng(seed)
    segs = []
    cursor = 0
    for m in means:
        rows = m + rng.standard_normal((n_per, d))
        segs.append(make_segment(cursor, rows))
        cursor += n_per + 10
    return segs


def test_segment_validation() -> None:
    rows = np.zeros((5, 2))
    seg = Segment(10, 15, rows)
    assert seg.n_frames == 5
    assert seg.bounds_sec(0.010) == (pytest.approx(0.10), pytest.approx(0.15))
    with pytest.raises(ValueError):
        Segment(15, 10, rows)
    with pytest.raises(ValueError):
        Segment(10, 10, rows)


def test_single_segment_single_cluster() -> None:
    segs = gaussian_segments([0.0])
    result = cluster_segments(segs)
    assert len(result) == 1
    assert result.clusters == [[0]]
    assert result.merge_trace == []


def test_no_segments_rejected() -> None:
    with pytest.raises(NoSegments):
        cluster_segments([])


def test_same_speaker_segments_all_merge() -> None:
    segs = gaussian_segments([0.0, 0.0, 0.0, 0.0], seed=1)
    result = cluster_segments(segs)
    assert len(result) == 1
    assert sorted(result.clusters[0]) == [0, 1, 2, 3]
    assert len(result.merge_trace) == 3


def test_alternating_speakers_two_pure_clusters() -> None:
    means = [0.0 if i % 2 == 0 else 6.0 for i in range(8)]
    segs = gaussian_segments(means, seed=2)
    result = cluster_segments(segs)
    assert len(result) == 2
    groups = [sorted(c) for c in result.clusters]
    assert groups == [[0, 2, 4, 6], [1, 3, 5, 7]]


def test_merge_cost_symmetric() -> None:
    rng = np.random.default_rng(3)
    a = rng.standard_normal((40, 4))
    b = 2.0 + rng.standard_normal((35, 4))
    assert abs(merge_cost(a, b) - merge_cost(b, a)) < 1e-12


def test_short_segments_marked_noise() -> None:
    rng = np.random.default_rng(4)
    long_a = make_segment(0, rng.standard_normal((40, 12)))
    short = make_segment(50, rng.standard_normal((5, 12)))
    long_b = make_segment(60, rng.standard_normal((40, 12)))
    result = cluster_segments([long_a, short, long_b], min_segment_frames=25)
    assert result.noise_segments() == [1]
    assert result.assignments[1] is None
    clustered = sorted(i for c in result.clusters for i in c)
    assert clustered == [0, 2]


def test_every_eligible_segment_in_exactly_one_cluster() -> None:
    means = [0.0, 5.0, 0.0, 10.0, 5.0, 0.0]
    segs = gaussian_segments(means, seed=5)
    result = cluster_segments(segs)
    seen = sorted(i for c in result.clusters for i in c)
    assert seen == list(range(6))
    for idx, cid in enumerate(result.assignments):
        assert idx in result.clusters[cid]


def test_assignments_and_rows_consistent() -> None:
    segs = gaussian_segments([0.0, 6.0, 0.0], seed=6)
    result = cluster_segments(segs)
    for members in result.clusters:
        rows = cluster_rows(segs, members)
        assert rows.shape[0] == sum(segs[i].n_frames for i in members)


def test_clustering_deterministic() -> None:
    means = [0.0, 4.0, 0.0, 4.0, 8.0]
    segs = gaussian_segments(means, seed=7)
    a = cluster_segments(segs)
    b = cluster_segments(segs)
    assert a.clusters == b.clusters
    assert a.merge_trace == b.merge_trace


def test_cluster_csv_includes_noise_rows(tmp_path) -> None:
    rng = np.random.default_rng(8)
    segs = [make_segment(0, rng.standard_normal((40, 12))),
            make_segment(50, rng.standard_normal((5, 12)))]
    result = cluster_segments(segs, min_segment_frames=25)
    path = tmp_path / "c.csv"
    write_cluster_csv(path, segs, result, hop_sec=0.010)
    lines = path.read_text().splitlines()
    assert lines[0] == "segment_start_sec,segment_end_sec,cluster_id"
    assert len(lines) == 3
    assert lines[2].endswith(",noise")
