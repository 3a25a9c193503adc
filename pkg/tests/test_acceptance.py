"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -s``).

The synthetic-benchmark criteria share cached 50-run experiment sweeps on the
default SBM fixture (seed 7, fixed arbitrarily). Citation-network criteria
need converted dataset files and skip when those are absent; see README.
"""

import functools
import os
import time
from fractions import Fraction

import numpy as np
import pytest

from tandemgnn import autodiff as ad
from tandemgnn import degree_vector, normalize_sym, sbm_fixture
from tandemgnn.autodiff import SparseMatrix, Tensor
from tandemgnn.experiments import ExperimentSpec, results_to_csv, run_experiment
from tandemgnn.losses import cross_entropy_masked, joint_loss, mincut_loss
from tandemgnn.model import (
    ModelConfig,
    build_adjacency,
    classify,
    classify_aux,
    cluster_assign,
    encode_auxiliary,
    encode_primary,
    forward_dual,
    forward_inputs,
    init_params,
    pearson_rows,
)
from tandemgnn.training import Mode

WORKERS = min(2, os.cpu_count() or 1)
FIXTURE_DATASET = "sbm:default,seed=7"


def report(name: str, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")


@functools.lru_cache(maxsize=None)
def sweep(mode: Mode, labels, drop) -> tuple:
    """50-run cell (10 structures x 5 repeats) on the shared fixture;
    collapses to 5 runs when the cell has no structural randomness."""
    spec = ExperimentSpec(
        dataset=FIXTURE_DATASET,
        mode=mode,
        labels_per_class=[labels] if labels is not None else [],
        edge_drop_rates=[drop] if drop else [],
        n_structures=10,
        n_repeats=5,
        base_seed=2026,
    )
    result = run_experiment(spec, workers=WORKERS)
    cell = result.cells[0]
    return cell.mean_acc, cell.std_acc, len(cell.records), results_to_csv(result)


class TestGradientCorrectness:
    def test_every_op_and_full_loss(self, toy_graph, toy_config, toy_params):
        started = time.perf_counter()
        rng = np.random.default_rng(0)
        worst_elementary = 0.0

        a = Tensor(rng.uniform(-1, 1, (3, 4)))
        b = Tensor(rng.uniform(-1, 1, (4, 2)))
        worst_elementary = max(worst_elementary, ad.grad_check(
            lambda: ad.frobenius_norm(ad.matmul(a, b)), [a, b]))

        from test_autodiff import random_sparse_symmetric

        m = random_sparse_symmetric(5, rng)
        t = Tensor(rng.uniform(-1, 1, (5, 3)))
        worst_elementary = max(worst_elementary, ad.grad_check(
            lambda: ad.total_sum(ad.spmm(m, t)), [t]))
        worst_elementary = max(worst_elementary, ad.grad_check(
            lambda: ad.total_sum(ad.elu(t)), [t]))
        worst_elementary = max(worst_elementary, ad.grad_check(
            lambda: ad.frobenius_norm(ad.softmax_rows(t)), [t]))
        worst_elementary = max(worst_elementary, ad.grad_check(
            lambda: ad.trace_quadratic(t, m), [t]))
        worst_elementary = max(worst_elementary, ad.grad_check(
            lambda: ad.frobenius_norm(t), [t]))

        bias = Tensor(rng.uniform(-1, 1, (1, 3)))
        col = Tensor(rng.uniform(0.5, 1.5, (5, 1)))
        scalar = Tensor([[1.7]])
        worst_elementary = max(worst_elementary, ad.grad_check(
            lambda: ad.total_sum(ad.div(ad.mul(ad.add(t, bias), col), scalar)),
            [t, bias, col, scalar]))
        worst_elementary = max(worst_elementary, ad.grad_check(
            lambda: ad.total_sum(ad.power(col, -0.5)), [col]))

        labels = rng.integers(0, 3, 5)
        mask = np.array([True, True, False, True, False])
        worst_elementary = max(worst_elementary, ad.grad_check(
            lambda: cross_entropy_masked(t, labels, mask), [t]))

        idx = np.array([0, 2, 2, 4])
        e_w = Tensor(rng.uniform(0.5, 1.0, (4, 1)))
        worst_elementary = max(worst_elementary, ad.grad_check(
            lambda: ad.total_sum(ad.gather_rows(t, idx)), [t]))
        worst_elementary = max(worst_elementary, ad.grad_check(
            lambda: ad.total_sum(ad.scatter_sum(e_w, idx, 5)), [e_w]))
        worst_elementary = max(worst_elementary, ad.grad_check(
            lambda: ad.total_sum(ad.pearson_pairs(t, idx, np.array([1, 3, 0, 2]))), [t]))
        worst_elementary = max(worst_elementary, ad.grad_check(
            lambda: ad.frobenius_norm(ad.weighted_spmm(idx, np.array([1, 3, 0, 2]), e_w, t, 5)),
            [e_w, t]))

        # full joint objective on the 12-node toy graph, reconstruction
        # frozen at the evaluation point as the training step treats it
        x, a_hat = forward_inputs(toy_graph)
        a_norm = normalize_sym(toy_graph.adjacency)
        deg = degree_vector(a_norm)
        a_sc = forward_dual(x, a_hat, toy_params, toy_config).a_sc

        def full_loss():
            h = encode_primary(x, a_hat, toy_params, toy_config)
            _, p_logits = classify(h, toy_params.cls_w, toy_params.cls_b)
            s = cluster_assign(h, toy_params)
            h_aux = encode_auxiliary(h, a_sc, toy_params, toy_config)
            _, p_aux_logits = classify_aux(h_aux, toy_params)
            ce = cross_entropy_masked(p_logits, toy_graph.labels, toy_graph.train_mask)
            ce_aux = cross_entropy_masked(p_aux_logits, toy_graph.labels, toy_graph.train_mask)
            return joint_loss(ce, ce_aux, mincut_loss(s, a_norm, deg))[0]

        worst_composite = ad.grad_check(full_loss, toy_params.all())
        elapsed = time.perf_counter() - started

        ok = worst_elementary <= 1e-4 and worst_composite <= 1e-3 and elapsed < 60.0
        report(
            "gradient-correctness", ok,
            f"elementary max rel err {worst_elementary:.2e} <= 1e-4, "
            f"full-loss {worst_composite:.2e} <= 1e-3, {elapsed:.1f}s < 60s",
        )
        assert worst_elementary <= 1e-4
        assert worst_composite <= 1e-3
        assert elapsed < 60.0


class TestMincutAnalytics:
    def test_fixtures_and_bounds(self):
        # disconnected unit-weight components, hard assignment: exactly -1
        a = SparseMatrix(4, [0, 1, 2, 3], [1, 0, 3, 2], np.ones(4))
        a_norm = normalize_sym(a)
        s = Tensor([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
        v_components = mincut_loss(s, a_norm, degree_vector(a_norm)).item()

        # uniform assignment with K=4: cut -1 and regularizer +1 cancel
        a2 = SparseMatrix(6, [0, 1, 2, 3], [1, 0, 3, 2], np.ones(4))
        a2_norm = normalize_sym(a2)
        v_uniform = mincut_loss(
            Tensor(np.full((6, 4), 0.25)), a2_norm, degree_vector(a2_norm)
        ).item()

        rng = np.random.default_rng(42)
        worst_cut_low = worst_cut_high = worst_reg_low = worst_reg_high = 0.0
        from test_autodiff import random_sparse_symmetric

        for _ in range(1000):
            n = int(rng.integers(4, 20))
            k = int(rng.integers(2, 8))
            g = random_sparse_symmetric(n, rng)
            gn = normalize_sym(g)
            deg = degree_vector(gn)
            logits = rng.uniform(-4, 4, (n, k))
            sv = np.exp(logits)
            sv /= sv.sum(axis=1, keepdims=True)
            dense = gn.to_dense()
            num = np.trace(sv.T @ dense @ sv)
            den = np.trace(sv.T @ np.diag(deg) @ sv)
            cut = -num / den
            sts = sv.T @ sv
            reg = np.linalg.norm(sts / np.linalg.norm(sts) - np.eye(k) / np.sqrt(k))
            worst_cut_low = min(worst_cut_low, cut + 1.0)
            worst_cut_high = max(worst_cut_high, cut)
            worst_reg_low = min(worst_reg_low, reg)
            worst_reg_high = max(worst_reg_high, reg - 2.0)

        ok = (
            abs(v_components + 1.0) <= 1e-9
            and abs(v_uniform) <= 1e-9
            and worst_cut_low >= -1e-9 and worst_cut_high <= 1e-9
            and worst_reg_low >= -1e-9 and worst_reg_high <= 1e-9
        )
        report(
            "mincut-analytics", ok,
            f"components fixture {v_components:+.2e} vs -1, uniform fixture "
            f"{v_uniform:+.2e} vs 0, bounds held on 1000 random instances",
        )
        assert abs(v_components + 1.0) <= 1e-9
        assert abs(v_uniform) <= 1e-9
        assert worst_cut_low >= -1e-9 and worst_cut_high <= 1e-9
        assert worst_reg_low >= -1e-9 and worst_reg_high <= 1e-9


def exact_threshold(u, v, alpha) -> bool:
    """Rational-arithmetic r(u, v) >= alpha with no rounding anywhere."""
    uf = [Fraction(float(x)) for x in u]
    vf = [Fraction(float(x)) for x in v]
    k = len(uf)
    du = [x - sum(uf) / k for x in uf]
    dv = [x - sum(vf) / k for x in vf]
    num = sum(p * q for p, q in zip(du, dv))
    d2u = sum(p * p for p in du)
    d2v = sum(q * q for q in dv)
    if d2u == 0 or d2v == 0:
        return False
    a = Fraction(float(alpha))
    if num < 0 <= a:
        return False
    if a <= 0 <= num:
        return True
    return (num * num >= a * a * d2u * d2v) if num >= 0 else (num * num <= a * a * d2u * d2v)


class TestAdjacencyOracle:
    def test_200_random_instances_and_boundary(self):
        rng = np.random.default_rng(7)
        worst_weight_gap = 0.0
        for trial in range(200):
            n = int(rng.integers(2, 33))
            k = int(rng.integers(2, 24))
            logits = rng.uniform(-2, 2, (n, k))
            s = np.exp(logits)
            s /= s.sum(axis=1, keepdims=True)
            alpha = float(rng.uniform(0.05, 0.95))
            ours = build_adjacency(s, alpha, block_size=7).to_dense()
            oracle = np.zeros((n, n))
            np.fill_diagonal(oracle, 1.0)
            for i in range(n):
                for j in range(i + 1, n):
                    r = pearson_rows(s[i], s[j])
                    if r >= alpha:
                        oracle[i, j] = oracle[j, i] = r
            assert np.array_equal(ours != 0, oracle != 0), f"edge sets differ on trial {trial}"
            worst_weight_gap = max(worst_weight_gap, np.abs(ours - oracle).max())

        # infinite-precision membership oracle on a subset
        for trial in range(10):
            s = rng.uniform(0, 1, (8, 6))
            alpha = float(rng.uniform(0.1, 0.9))
            dense = build_adjacency(s, alpha).to_dense()
            for i in range(8):
                for j in range(i + 1, 8):
                    assert (dense[i, j] != 0) == exact_threshold(s[i], s[j], alpha)

        # exact boundary: a dyadic instance whose correlation is 0.5 in
        # float64 with no rounding anywhere on either path
        s = np.array([
            [2.0, 0.0, 2.0, 0.0, 1.0, 1.0, 1.0, 1.0],
            [2.0, 0.0, 1.0, 1.0, 2.0, 0.0, 1.0, 1.0],
        ])
        at_boundary = build_adjacency(s, 0.5).to_dense()[0, 1]
        above_boundary = build_adjacency(s, np.nextafter(0.5, 1.0)).to_dense()[0, 1]
        boundary_ok = at_boundary == 0.5 and above_boundary == 0.0

        ok = worst_weight_gap <= 5e-15 and boundary_ok
        report(
            "adjacency-oracle", ok,
            f"200 instances: edge sets exact, max weight gap {worst_weight_gap:.1e} "
            f"<= 5e-15; inclusive boundary exact at r == alpha",
        )
        assert worst_weight_gap <= 5e-15
        assert boundary_ok


class TestFewLabelImprovement:
    def test_dual_beats_baseline_by_3_points(self):
        started = time.perf_counter()
        base_mean, base_std, base_n, _ = sweep(Mode.BASELINE, 2, 0.0)
        dual_mean, dual_std, dual_n, _ = sweep(Mode.DUAL, 2, 0.0)
        elapsed = time.perf_counter() - started
        gap = dual_mean - base_mean
        ok = gap >= 0.03 and base_n == 50 and dual_n == 50 and elapsed <= 900
        report(
            "few-label-improvement", ok,
            f"dual {dual_mean:.3f}+-{dual_std:.3f} vs baseline {base_mean:.3f}"
            f"+-{base_std:.3f} over {dual_n} runs, gap {gap:+.3f} "
            f"(needs >= +0.030), {elapsed:.0f}s",
        )
        assert base_n == 50 and dual_n == 50
        assert elapsed <= 900
        assert gap >= 0.03, (
            f"dual mean {dual_mean:.3f} does not exceed baseline {base_mean:.3f} "
            f"by 3 points on this fixture: at the default optimizer settings the "
            f"cluster head converges to identical assignment rows (weight decay "
            f"outruns the flat clustering-loss gradient at this graph size), so "
            f"the reconstructed adjacency carries no class structure and the "
            f"auxiliary classifier cannot add accuracy. No configuration of the "
            f"flagged open choices was found that reaches the margin while "
            f"preserving the other criteria; see the failure analysis shipped "
            f"with the build notes."
        )


class TestCorruptionRobustness:
    def test_dual_at_least_baseline_under_heavy_corruption(self):
        base_mean, base_std, base_n, _ = sweep(Mode.BASELINE, None, 0.9)
        dual_mean, dual_std, dual_n, _ = sweep(Mode.DUAL, None, 0.9)
        ok = dual_mean >= base_mean and base_n == 50 and dual_n == 50
        report(
            "corruption-robustness", ok,
            f"dual {dual_mean:.3f}+-{dual_std:.3f} vs baseline {base_mean:.3f}"
            f"+-{base_std:.3f} at drop 0.9 over {dual_n} runs",
        )
        assert base_n == 50 and dual_n == 50
        assert dual_mean >= base_mean


class TestAblationCollapse:
    def test_auxiliary_only_collapses_and_primary_cluster_matches(self):
        base_mean, _, _, _ = sweep(Mode.BASELINE, 2, 0.0)
        aux_mean, aux_std, _, _ = sweep(Mode.AUXILIARY_PLUS_CLUSTER, 2, 0.0)
        prim_mean, prim_std, _, _ = sweep(Mode.PRIMARY_PLUS_CLUSTER, 2, 0.0)
        aux_ok = aux_mean <= base_mean - 0.10
        prim_ok = abs(prim_mean - base_mean) <= 0.03
        report(
            "ablation-collapse", aux_ok and prim_ok,
            f"aux-only {aux_mean:.3f}+-{aux_std:.3f} vs baseline-0.10 "
            f"{base_mean - 0.10:.3f}; primary+cluster {prim_mean:.3f}"
            f"+-{prim_std:.3f} within +-0.03 of baseline {base_mean:.3f}",
        )
        assert aux_ok
        assert prim_ok


class TestDeterminism:
    def test_identical_spec_gives_byte_identical_csv(self, tmp_path):
        spec = ExperimentSpec(
            dataset=FIXTURE_DATASET, mode=Mode.BASELINE,
            labels_per_class=[2], n_structures=2, n_repeats=2,
            base_seed=99, epochs=60,
        )
        first = results_to_csv(run_experiment(spec, workers=1))
        second = results_to_csv(run_experiment(spec, workers=WORKERS))
        ok = first.encode() == second.encode()
        report("determinism", ok, f"{len(first)} CSV bytes identical across re-runs")
        assert ok


def _dataset_path(name: str):
    root = os.environ.get("TANDEMGNN_DATA", os.path.join(os.path.dirname(__file__), "..", "data"))
    path = os.path.join(root, f"{name}.txt")
    return path if os.path.exists(path) else None


def _citation_sweep(path, mode, labels, runs_structures, runs_repeats, base_seed=2026):
    spec = ExperimentSpec(
        dataset=path, mode=mode,
        labels_per_class=[labels] if labels is not None else [],
        n_structures=runs_structures, n_repeats=runs_repeats, base_seed=base_seed,
    )
    cell = run_experiment(spec, workers=WORKERS).cells[0]
    return cell.mean_acc, cell.std_acc, len(cell.records)


class TestCitationReproduction:
    def test_cora_reproduction(self):
        path = _dataset_path("cora")
        if path is None:
            pytest.skip("converted cora dataset not present (see README: data/cora.txt)")
        started = time.perf_counter()
        base_mean, _, base_n = _citation_sweep(path, Mode.BASELINE, None, 1, 5)
        dual_mean, _, dual_n = _citation_sweep(path, Mode.DUAL, None, 1, 5)
        base2_mean, _, _ = _citation_sweep(path, Mode.BASELINE, 2, 10, 5)
        dual2_mean, _, _ = _citation_sweep(path, Mode.DUAL, 2, 10, 5)
        elapsed = time.perf_counter() - started
        gap2 = dual2_mean - base2_mean
        ok = (
            abs(base_mean - 0.815) <= 0.02 and abs(dual_mean - 0.827) <= 0.02
            and gap2 >= 0.04 and elapsed <= 3600
        )
        report(
            "cora-reproduction", ok,
            f"baseline {base_mean:.3f} (target 0.815+-0.020, {base_n} runs), "
            f"dual {dual_mean:.3f} (target 0.827+-0.020), 2-label gap {gap2:+.3f} "
            f"(needs >= +0.040), {elapsed:.0f}s",
        )
        assert abs(base_mean - 0.815) <= 0.02
        assert abs(dual_mean - 0.827) <= 0.02
        assert gap2 >= 0.04
        assert elapsed <= 3600

    def test_citeseer_direction(self):
        path = _dataset_path("citeseer")
        if path is None:
            pytest.skip("converted citeseer dataset not present (see README: data/citeseer.txt)")
        base_mean, _, _ = _citation_sweep(path, Mode.BASELINE, 2, 10, 5)
        dual_mean, _, _ = _citation_sweep(path, Mode.DUAL, 2, 10, 5)
        gap = dual_mean - base_mean
        ok = gap >= 0.04
        report(
            "citeseer-direction", ok,
            f"dual {dual_mean:.3f} vs baseline {base_mean:.3f}, gap {gap:+.3f} (needs >= +0.040)",
        )
        assert gap >= 0.04
