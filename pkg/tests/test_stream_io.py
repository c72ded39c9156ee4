from __future__ import annotations

import random
from collections import Counter

import pytest

from compas_sampling.stream_io import (EdgeEvent, EdgeStream, StreamFormatError, block_sizes,
                                       check_labels, generate_planted_partition, load_edge_stream,
                                       load_labels, perturb_order, randomize_order,
                                       write_edge_file, write_labels)


def _write(tmp_path, text, name="edges.txt"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_plain_file_keeps_line_order(tmp_path):
    s = load_edge_stream(_write(tmp_path, "1 2\n2 3"))
    assert list(s) == [EdgeEvent(1, 2, 0), EdgeEvent(2, 3, 1)]
    assert s.node_count == 3


def test_self_loop_dropped_and_counted(tmp_path):
    s = load_edge_stream(_write(tmp_path, "1 2\n1 1\n2 3\n"))
    assert s.dropped_self_loops == 1
    assert s.pairs() == [(1, 2), (2, 3)]


def test_timestamped_file_sorted_by_time(tmp_path):
    lines = ["4 5 30", "1 2 10", "2 3 20"]
    s = load_edge_stream(_write(tmp_path, "\n".join(lines)), format="timestamped")
    # oracle: sort the raw lines by their third column
    expected = [tuple(map(int, l.split()[:2])) for l in sorted(lines, key=lambda l: int(l.split()[2]))]
    assert s.pairs() == expected
    assert [e.t for e in s] == [0, 1, 2]


def test_timestamp_ties_follow_line_order(tmp_path):
    s = load_edge_stream(_write(tmp_path, "7 8 5\n1 2 5\n3 4 1\n"), format="timestamped")
    assert s.pairs() == [(3, 4), (7, 8), (1, 2)]
    assert s.metadata["tie_break"] == "line_order"


def test_comments_and_blank_lines_skipped(tmp_path):
    s = load_edge_stream(_write(tmp_path, "# header\n\n1 2\n  # note\n3 4\n"))
    assert len(s) == 2


@pytest.mark.parametrize("text,fragment", [
    ("1 2\n1 x\n", ":2:"),
    ("1 2 3 4\n", ":1:"),
    ("1\n", ":1:"),
    ("-1 2\n", ":1:"),
])
def test_malformed_lines_report_line_number(tmp_path, text, fragment):
    with pytest.raises(StreamFormatError, match=fragment):
        load_edge_stream(_write(tmp_path, text))


def test_empty_stream_is_an_error(tmp_path):
    with pytest.raises(StreamFormatError):
        load_edge_stream(_write(tmp_path, "# nothing\n3 3\n"))


def test_duplicates_are_kept_in_stream(tmp_path):
    s = load_edge_stream(_write(tmp_path, "1 2\n2 1\n1 2\n"))
    assert len(s) == 3


def test_stream_is_replayable():
    s = EdgeStream.from_pairs([(1, 2), (2, 3), (3, 1)])
    assert list(s) == list(s)


def test_randomize_singleton_unchanged():
    s = EdgeStream.from_pairs([(4, 9)])
    assert randomize_order(s, 123).pairs() == [(4, 9)]


def test_randomize_is_deterministic():
    s = EdgeStream.from_pairs([(i, i + 1) for i in range(20)])
    assert randomize_order(s, 5).events == randomize_order(s, 5).events


def test_randomize_matches_reference_shuffle():
    pairs = [(0, 1), (1, 2), (2, 3), (3, 4)]
    s = EdgeStream.from_pairs(pairs)
    ref = list(pairs)
    random.Random(42).shuffle(ref)
    out = randomize_order(s, 42)
    assert out.pairs() == ref
    assert [e.t for e in out] == [0, 1, 2, 3]


def test_randomize_rejects_empty():
    with pytest.raises(ValueError):
        randomize_order(EdgeStream([]), 0)


def test_perturb_zero_is_identity():
    s = EdgeStream.from_pairs([(i, i + 1) for i in range(10)])
    assert perturb_order(s, 0.0, 3).pairs() == s.pairs()


def test_perturb_half_on_four_edges():
    s = EdgeStream.from_pairs([(0, 1), (1, 2), (2, 3), (3, 4)])
    out = perturb_order(s, 0.5, 11)
    assert out.metadata["swaps"] == 2
    assert Counter(out.pairs()) == Counter(s.pairs())


def test_perturb_tenth_of_hundred():
    s = EdgeStream.from_pairs([(i, i + 1000) for i in range(100)])
    out = perturb_order(s, 0.1, 2)
    assert out.metadata["swaps"] == 10
    moved = sum(1 for a, b in zip(s.pairs(), out.pairs()) if a != b)
    assert moved <= 20


@pytest.mark.parametrize("y", [0.0, 0.05, 0.3, 1.0])
def test_perturb_preserves_multiset(y):
    rng = random.Random(int(y * 100))
    s = EdgeStream.from_pairs([(rng.randrange(10), rng.randrange(10, 20)) for _ in range(57)])
    assert Counter(perturb_order(s, y, 1).pairs()) == Counter(s.pairs())


def test_perturb_rejects_bad_fraction():
    with pytest.raises(ValueError):
        perturb_order(EdgeStream.from_pairs([(1, 2)]), 1.5, 0)


def test_block_sizes_near_equal():
    assert block_sizes(10, 3) == [4, 3, 3]
    assert sum(block_sizes(1001, 20)) == 1001


def test_planted_extremes_two_triangles():
    s, labels = generate_planted_partition(6, 2, 1.0, 0.0, seed=3)
    assert len(s) == 6
    groups = {}
    for x, c in labels.items():
        groups.setdefault(c, set()).add(x)
    assert sorted(len(g) for g in groups.values()) == [3, 3]
    for u, v in s.pairs():
        assert labels[u] == labels[v]


def test_planted_rejects_zero_p_in():
    with pytest.raises(ValueError):
        generate_planted_partition(50, 3, 0.0, 0.0, seed=1)


@pytest.mark.parametrize("args", [(3, 5, 0.5, 0.1), (10, 0, 0.5, 0.1), (10, 2, 0.2, 0.3)])
def test_planted_rejects_bad_parameters(args):
    with pytest.raises(ValueError):
        generate_planted_partition(*args, seed=0)


def test_planted_intra_fraction_matches_expectation():
    n, k, p_in, p_out = 200, 4, 0.3, 0.01
    sizes = block_sizes(n, k)
    intra_pairs = sum(s * (s - 1) // 2 for s in sizes)
    inter_pairs = n * (n - 1) // 2 - intra_pairs
    expected = intra_pairs * p_in / (intra_pairs * p_in + inter_pairs * p_out)
    fracs = []
    for seed in range(20):
        s, labels = generate_planted_partition(n, k, p_in, p_out, seed)
        fracs.append(sum(labels[u] == labels[v] for u, v in s.pairs()) / len(s))
    assert abs(sum(fracs) / len(fracs) - expected) <= 0.05


def test_planted_no_inter_edges_when_p_out_zero():
    s, labels = generate_planted_partition(40, 4, 0.5, 0.0, seed=9)
    assert all(labels[u] == labels[v] for u, v in s.pairs())


def test_planted_is_deterministic_and_simple():
    a, la = generate_planted_partition(120, 3, 0.2, 0.02, seed=4)
    b, lb = generate_planted_partition(120, 3, 0.2, 0.02, seed=4)
    assert a.events == b.events and la == lb
    keys = [frozenset(p) for p in a.pairs()]
    assert len(keys) == len(set(keys))
    assert set(la) == a.nodes()


def test_planted_ids_do_not_follow_blocks():
    # block membership is spread over the id range rather than laid out in runs
    _, labels = generate_planted_partition(200, 4, 0.5, 0.01, seed=0)
    low = {labels[x] for x in range(50) if x in labels}
    assert len(low) > 1


def test_label_roundtrip(tmp_path):
    labels = {3: 1, 1: 0, 2: 1}
    p = tmp_path / "labels.txt"
    write_labels(p, labels, header="made by a test")
    assert load_labels(p) == labels
    assert p.read_text().startswith("# made by a test")


def test_label_parse_error(tmp_path):
    with pytest.raises(StreamFormatError, match=":2:"):
        load_labels(_write(tmp_path, "1 2\n3\n", "l.txt"))


def test_labels_must_appear_in_stream():
    s = EdgeStream.from_pairs([(1, 2)])
    check_labels({1: 0, 2: 0}, s)
    with pytest.raises(StreamFormatError):
        check_labels({1: 0, 9: 1}, s)


def test_edge_file_roundtrip(tmp_path):
    p = tmp_path / "e.txt"
    write_edge_file(p, [(1, 2), (5, 3)], header="x")
    assert load_edge_stream(p).pairs() == [(1, 2), (5, 3)]
