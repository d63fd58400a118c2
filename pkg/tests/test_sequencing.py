"""Tests for rti_studio.sequencing."""

import math

import numpy as np
import pytest

from rti_studio.errors import ConfigError
from rti_studio.lighting import ScanRegion, sppa_positions
from rti_studio.sequencing import (
    Sequence,
    boundary_pair_candidates,
    brute_force_tour,
    etsp_tour,
    sppa_sequence,
    tour_length,
)


def _region(lh=(-math.pi / 2, math.pi / 2), lv=(0.0, math.pi / 3), d_l=2.0):
    return ScanRegion(
        lambda_h_min=lh[0],
        lambda_h_max=lh[1],
        lambda_v_min=lv[0],
        lambda_v_max=lv[1],
        d_l=d_l,
        ooi=np.zeros(3),
    )


def _assert_permutation(seq, plan):
    """Each plan position appears exactly once between the P_i endpoints."""
    np.testing.assert_allclose(seq.positions[0], plan.initial)
    np.testing.assert_allclose(seq.positions[-1], plan.initial)
    inner = seq.positions[1:-1]
    assert len(inner) == len(plan.positions)
    want = sorted(tuple(np.round(p, 9)) for p in plan.positions)
    got = sorted(tuple(np.round(p, 9)) for p in inner)
    assert got == want


class TestSppaSequence:
    def test_two_by_three_hand_trace(self):
        # grid with 2 rows x 3 columns and P_i left of the lower row:
        # climb at the left boundary, sweep the top row right-to-... no:
        # the documented trace is P_i, (2,1), (2,2), (2,3), (1,3), (1,2),
        # (1,1), P_i with row 2 the upper row
        region = _region(lh=(-0.4, 0.4), lv=(0.1, 0.5))
        plan = sppa_positions(region, 2, np.zeros(3))
        # force exactly 3 columns per row for the hand trace
        if plan.row_sizes() != [3, 3]:
            rows = [(lv, [region.lambda_h_min, 0.0, region.lambda_h_max])
                    for lv, _ in plan.rows]
            positions = [
                region.position(lh, lv) for lv, samples in rows for lh in samples
            ]
            plan.rows = rows
            plan.positions = positions
        initial = region.position(region.lambda_h_min, 0.3) * 1.05
        plan.initial = np.asarray(initial)

        seq = sppa_sequence(plan)
        # row 0 = lambda_v_min is lower in z here (light cap below the OoI?
        # no: lv > 0 means below the OoI, so larger lv is lower) -> row 0 is
        # the upper row; labels use (row, col) with col 0 the left boundary
        labels = seq.labels[1:-1]
        assert labels == [
            (1, 0), (1, 1), (1, 2), (0, 2), (0, 1), (0, 0)
        ] or labels == [
            (0, 0), (0, 1), (0, 2), (1, 2), (1, 1), (1, 0)
        ]
        _assert_permutation(seq, plan)

    def test_rejects_non_sppa_plan(self):
        plan = sppa_positions(_region(), 2, np.zeros(3))
        plan.kind = "fibonacci"
        with pytest.raises(ConfigError):
            sppa_sequence(plan)

    def test_rejects_unknown_traversal(self):
        plan = sppa_positions(_region(), 2, np.zeros(3))
        with pytest.raises(ConfigError):
            sppa_sequence(plan, traversal="spiral")

    def test_boundary_pair_is_closest(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            span_v = rng.uniform(0.2, 1.0)
            lv_min = rng.uniform(-math.pi / 2, math.pi / 2 - span_v)
            region = _region(
                lh=(-rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)),
                lv=(lv_min, lv_min + span_v),
                d_l=rng.uniform(1.0, 4.0),
            )
            initial = rng.normal(size=3) * 2
            plan = sppa_positions(region, int(rng.integers(2, 7)), initial)
            cands = boundary_pair_candidates(
                [plan.positions[s:e] for s, e in _row_slices(plan)], plan.initial
            )
            if not cands:
                continue
            seq = sppa_sequence(plan)
            start_label = seq.labels[1]
            best = min(c[3] for c in cands)
            # the sequence starts at a boundary member of a minimal-cost pair
            starts = set()
            for a, b, side, cost in cands:
                if cost <= best + 1e-9:
                    starts.add((a, 0 if side == 0 else -1))
                    starts.add((b, 0 if side == 0 else -1))
            row, col = start_label
            grid_rows = _row_slices(plan)
            ncols = grid_rows[row][1] - grid_rows[row][0]
            norm_col = 0 if col == 0 else (-1 if col == ncols - 1 else col)
            assert (row, norm_col) in starts

    def test_permutation_over_random_grids(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            span_v = rng.uniform(0.15, 1.2)
            lv_min = rng.uniform(-math.pi / 2, math.pi / 2 - span_v)
            lo = rng.uniform(-math.pi, 0.0)
            region = _region(
                lh=(lo, lo + rng.uniform(0.4, 2.5)),
                lv=(lv_min, lv_min + span_v),
                d_l=rng.uniform(0.5, 5.0),
            )
            plan = sppa_positions(region, int(rng.integers(2, 8)), rng.normal(size=3) * 3)
            traversal = "zigzag" if rng.random() < 0.5 else "double_pass"
            seq = sppa_sequence(plan, traversal=traversal)
            _assert_permutation(seq, plan)

    def test_translation_invariance(self):
        region = _region()
        plan = sppa_positions(region, 3, np.array([0.0, 0.0, -2.0]))
        base = sppa_sequence(plan).length_m
        shift = np.array([3.0, -1.0, 0.5])
        region2 = ScanRegion(
            lambda_h_min=region.lambda_h_min,
            lambda_h_max=region.lambda_h_max,
            lambda_v_min=region.lambda_v_min,
            lambda_v_max=region.lambda_v_max,
            d_l=region.d_l,
            ooi=region.ooi + shift,
        )
        plan2 = sppa_positions(region2, 3, np.array([0.0, 0.0, -2.0]) + shift)
        assert sppa_sequence(plan2).length_m == pytest.approx(base, abs=1e-9)


def _row_slices(plan):
    out = []
    k = 0
    for _, samples in plan.rows:
        out.append((k, k + len(samples)))
        k += len(samples)
    return out


class TestBruteForceTour:
    def test_triangle_perimeter(self):
        pts = [np.array([0.0, 0.0, 0.0]), np.array([3.0, 0.0, 0.0]),
               np.array([0.0, 4.0, 0.0])]
        seq = brute_force_tour(pts)
        assert seq.length_m == pytest.approx(12.0)

    def test_two_points_out_and_back(self):
        pts = [np.zeros(3), np.array([0.0, 0.0, 2.5])]
        assert brute_force_tour(pts).length_m == pytest.approx(5.0)

    def test_refuses_large_instances(self):
        pts = [np.random.default_rng(0).normal(size=3) for _ in range(11)]
        with pytest.raises(ConfigError):
            brute_force_tour(pts)

    def test_square_plus_center(self):
        pts = [np.array(p, dtype=float) for p in
               [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (0.5, 0.5, 0)]]
        seq = brute_force_tour(pts)
        # independent exhaustive recomputation
        import itertools

        best = min(
            tour_length([pts[0]] + [pts[i] for i in perm] + [pts[0]])
            for perm in itertools.permutations(range(1, 5))
        )
        assert seq.length_m == pytest.approx(best)


class TestEtspTour:
    def test_unit_square(self):
        pts = [np.array(p, dtype=float) for p in
               [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)]]
        assert etsp_tour(pts).length_m == pytest.approx(4.0)

    def test_collinear_out_and_back(self):
        pts = [np.array([x, 0.0, 0.0]) for x in (0.0, 1.0, 2.5, 4.0, 0.7)]
        assert etsp_tour(pts).length_m == pytest.approx(8.0)

    def test_closed_and_starts_at_first(self):
        rng = np.random.default_rng(8)
        pts = [rng.normal(size=3) for _ in range(30)]
        seq = etsp_tour(pts)
        np.testing.assert_allclose(seq.positions[0], pts[0])
        np.testing.assert_allclose(seq.positions[-1], pts[0])
        assert sorted(seq.labels[:-1]) == list(range(30))

    def test_duplicate_points_allowed(self):
        pts = [np.zeros(3), np.zeros(3), np.array([1.0, 0.0, 0.0])]
        seq = etsp_tour(pts)
        assert seq.length_m == pytest.approx(2.0)

    def test_two_opt_fixpoint(self):
        rng = np.random.default_rng(12)
        pts = rng.uniform(size=(25, 3))
        seq = etsp_tour(list(pts))
        order = seq.labels[:-1]
        n = len(order)
        base = seq.length_m
        for i in range(n - 1):
            for j in range(i + 1, n):
                trial = order[: i + 1] + order[i + 1 : j + 1][::-1] + order[j + 1 :]
                length = tour_length([pts[k] for k in trial + [trial[0]]])
                assert length >= base - 1e-9

    def test_matches_oracle_on_small_instances(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            pts = [rng.uniform(size=3) for _ in range(7)]
            assert etsp_tour(pts).length_m <= 1.05 * brute_force_tour(pts).length_m + 1e-9


class TestSequenceSerialization:
    def test_json_roundtrip(self):
        pts = [np.zeros(3), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])]
        seq = etsp_tour(pts)
        again = Sequence.from_json(seq.to_json())
        assert again.labels == seq.labels
        assert again.length_m == pytest.approx(seq.length_m)
        for a, b in zip(again.positions, seq.positions):
            np.testing.assert_allclose(a, b)

    def test_csv_header(self):
        seq = etsp_tour([np.zeros(3), np.ones(3)])
        assert seq.to_csv().splitlines()[0] == "index,x,y,z"
