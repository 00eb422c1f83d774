import math
import random
import statistics

import pytest

from tosguard.meta import (
    MetaAnalysisError,
    RunObservation,
    dl_tau2,
    pooled_mean,
    random_effects,
    rank_configs,
    ranking_table_csv,
    read_observations_csv,
)


def observations(config_id, task_values):
    """task_values: {task: [seed values]} applied to both metrics unless
    a (macro, micro) tuple list is given."""
    out = []
    for task, values in task_values.items():
        for seed, value in enumerate(values):
            if isinstance(value, tuple):
                macro, micro = value
            else:
                macro = micro = value
            out.append(RunObservation(config_id, task, seed, macro, micro))
    return out


class TestRandomEffects:
    def test_identical_tasks_give_tau2_zero(self):
        obs = observations("c", {"t1": [0.7, 0.8], "t2": [0.7, 0.8]})
        result = random_effects(obs, "macro_f1")
        assert result.pooled_mean == pytest.approx(0.75)
        assert result.tau2 == 0.0

    def test_symmetric_tasks_pool_to_midpoint(self):
        obs = observations("c", {"t1": [0.59, 0.61], "t2": [0.79, 0.81]})
        result = random_effects(obs, "macro_f1")
        assert result.pooled_mean == pytest.approx(0.7)

    def test_independent_dl_oracle_4x4(self):
        # 4 tasks x 4 seeds; oracle scripted step by step from the
        # published estimator
        values = {
            "t1": [0.612, 0.598, 0.605, 0.621],
            "t2": [0.702, 0.688, 0.694, 0.711],
            "t3": [0.553, 0.561, 0.548, 0.559],
            "t4": [0.664, 0.672, 0.658, 0.669],
        }
        obs = observations("c", values)
        result = random_effects(obs, "macro_f1")

        means = {t: sum(v) / 4 for t, v in values.items()}
        variances = {t: statistics.variance(v) / 4 for t, v in values.items()}
        ys = [means[t] for t in sorted(values)]
        vs = [variances[t] for t in sorted(values)]
        w_star = [1 / v for v in vs]
        fixed = sum(w * y for w, y in zip(w_star, ys)) / sum(w_star)
        q = sum(w * (y - fixed) ** 2 for w, y in zip(w_star, ys))
        c = sum(w_star) - sum(w * w for w in w_star) / sum(w_star)
        tau2 = max(0.0, (q - 3) / c)
        weights = [1 / (v + tau2) for v in vs]
        mu = sum(w * y for w, y in zip(weights, ys)) / sum(weights)
        se = math.sqrt(1 / sum(weights))

        assert result.tau2 == pytest.approx(tau2, abs=1e-10)
        assert result.pooled_mean == pytest.approx(mu, abs=1e-10)
        assert result.se == pytest.approx(se, abs=1e-10)
        assert result.ci_low == pytest.approx(mu - 1.96 * se, abs=1e-10)
        assert result.ci_high == pytest.approx(mu + 1.96 * se, abs=1e-10)
        assert result.hetero_ci_low == pytest.approx(
            mu - 1.96 * math.sqrt(tau2 + se * se), abs=1e-10
        )

    def test_tau2_never_negative(self):
        rng = random.Random(3)
        for _ in range(100):
            ys = [rng.uniform(0.3, 0.9) for _ in range(4)]
            vs = [rng.uniform(1e-5, 1e-2) for _ in range(4)]
            assert dl_tau2(ys, vs) >= 0.0

    def test_large_tau2_equalizes_weights(self):
        ys = [0.4, 0.6, 0.9]
        vs = [1e-4, 5e-3, 2e-2]
        mu, _ = pooled_mean(ys, vs, 1e9)
        assert mu == pytest.approx(sum(ys) / 3, abs=1e-9)

    def test_tau2_zero_is_fixed_effect_mean(self):
        ys = [0.4, 0.6, 0.9]
        vs = [1e-4, 5e-3, 2e-2]
        mu, _ = pooled_mean(ys, vs, 0.0)
        w = [1 / v for v in vs]
        expected = sum(wi * y for wi, y in zip(w, ys)) / sum(w)
        assert mu == pytest.approx(expected, abs=1e-12)

    def test_degenerate_variance_identical_means(self):
        obs = observations("c", {"t1": [0.7, 0.7, 0.7], "t2": [0.7, 0.7, 0.7]})
        result = random_effects(obs, "macro_f1")
        assert result.pooled_mean == pytest.approx(0.7)
        assert result.tau2 == 0.0
        assert result.ci_high - result.ci_low < 1e-5

    def test_single_task_rejected(self):
        obs = observations("c", {"t1": [0.7, 0.8]})
        with pytest.raises(MetaAnalysisError, match="2 tasks"):
            random_effects(obs, "macro_f1")

    def test_single_seed_rejected(self):
        obs = observations("c", {"t1": [0.7], "t2": [0.8]})
        with pytest.raises(MetaAnalysisError, match="seed runs"):
            random_effects(obs, "macro_f1")

    def test_task_relabeling_invariance(self):
        values = {"t1": [0.6, 0.62], "t2": [0.7, 0.72], "t3": [0.8, 0.82]}
        renamed = {"x9": values["t1"], "a1": values["t2"], "zz": values["t3"]}
        r1 = random_effects(observations("c", values), "macro_f1")
        r2 = random_effects(observations("c", renamed), "macro_f1")
        assert r1.pooled_mean == pytest.approx(r2.pooled_mean, abs=1e-12)
        assert r1.tau2 == pytest.approx(r2.tau2, abs=1e-12)


class TestRankConfigs:
    def test_single_config(self):
        obs = observations("only", {"t1": [0.5, 0.52], "t2": [0.6, 0.62]})
        results = rank_configs(obs)
        assert len(results) == 1
        assert results[0].config_id == "only"

    def test_strict_domination(self):
        obs = observations("worse", {"t1": [0.4, 0.42], "t2": [0.5, 0.52]})
        obs += observations("better", {"t1": [0.7, 0.72], "t2": [0.8, 0.82]})
        results = rank_configs(obs)
        assert [r.config_id for r in results] == ["better", "worse"]

    def test_composite_prefers_stable_config(self):
        # config A: higher raw macro (0.7316) but unstable (tau2 ~= 0.048),
        # weaker micro; config B: macro 0.7308, tau2 ~= 0.0355, micro 0.7637.
        # The composite must put B first.
        a_macro = [0.4916, 0.6116, 0.8516, 0.9716]  # mean .7316, var .0480
        a_micro = [0.5576, 0.6636, 0.8516, 0.9576]  # mean .7576, var .0326
        b_macro = [0.5308, 0.6158, 0.8458, 0.9308]  # mean .7308, var .0355
        b_micro = [0.5937, 0.6877, 0.8397, 0.9337]  # mean .7637, var .0231
        obs = []
        for i, task in enumerate(["illegal", "dark", "gray", "unfair"]):
            for seed in range(4):
                obs.append(RunObservation("text3large", task, seed, a_macro[i], a_micro[i]))
                obs.append(RunObservation("multie5", task, seed, b_macro[i], b_micro[i]))
        results = rank_configs(obs)
        assert [r.config_id for r in results] == ["multie5", "text3large"]
        winner, runner_up = results
        assert winner.macro.pooled_mean == pytest.approx(0.7308, abs=1e-9)
        assert winner.micro.pooled_mean == pytest.approx(0.7637, abs=1e-9)
        assert runner_up.macro.pooled_mean == pytest.approx(0.7316, abs=1e-9)
        assert runner_up.micro.pooled_mean == pytest.approx(0.7576, abs=1e-9)
        assert winner.macro.tau2 == pytest.approx(0.0355, abs=2e-3)
        assert runner_up.macro.tau2 == pytest.approx(0.0483, abs=2e-3)
        assert winner.macro.tau2 < runner_up.macro.tau2
        assert winner.composite > runner_up.composite

    def test_uneven_coverage_lists_missing_cells(self):
        obs = observations("a", {"t1": [0.5, 0.52], "t2": [0.6, 0.62]})
        obs += observations("b", {"t1": [0.7, 0.72]})
        with pytest.raises(MetaAnalysisError, match=r"\('b', 't2'\)"):
            rank_configs(obs)

    def test_csv_round_trip_and_table(self):
        obs = observations("cfg", {"t1": [0.5, 0.52], "t2": [0.6, 0.62]})
        csv_text = "config_id,task_id,seed,macro_f1,micro_f1\n" + "\n".join(
            f"{o.config_id},{o.task_id},{o.seed},{o.macro_f1},{o.micro_f1}" for o in obs
        )
        parsed = read_observations_csv(csv_text)
        assert parsed == obs
        table = ranking_table_csv(rank_configs(parsed))
        header = table.splitlines()[0]
        assert header.split(",")[:3] == ["config_id", "re_macro_f1", "macro_ci_low"]
        assert "cfg" in table
