import json

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from envcontours import dependence as dep
from envcontours.cli import main as cli_main
from envcontours.evt import GpdFit, return_level
from envcontours.pipeline import (
    MODEL_NAMES,
    PipelineError,
    StudyConfig,
    default_synthesis_config,
    default_synthetic_params,
    emit_descriptive_stats,
    fit_all_models,
    format_report_tables,
    load_study_config,
    run_study,
    stage_seed,
)


def _small_config(out_dir, seed=5, **overrides):
    base = dict(
        seed=seed,
        out_dir=str(out_dir),
        synthesis=default_synthesis_config(3.0),
        monte_carlo_n=20_000,
        grid_resolution=162,
        quantile_check_levels=[0.5, 0.9],
        # 3 years gives ~170 storms; the default joint-tail level would
        # leave too few joint exceedances for the Nataf fit
        nataf_tail_quantile=0.6,
    )
    base.update(overrides)
    return StudyConfig(**base)


@pytest.fixture(scope="module")
def small_study(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    report = run_study(_small_config(out))
    return out, report


class TestStageSeeds:
    def test_deterministic(self):
        assert stage_seed(7, "synthesis") == stage_seed(7, "synthesis")

    def test_distinct_across_stages(self):
        seeds = {stage_seed(7, s) for s in (
            "synthesis", "simulate.independence", "simulate.nataf", "bootstrap",
        )}
        assert len(seeds) == 4

    def test_distinct_across_roots(self):
        assert stage_seed(1, "synthesis") != stage_seed(2, "synthesis")


class TestStudyConfig:
    def test_bad_quantile(self, tmp_path):
        with pytest.raises(PipelineError, match="quantile"):
            StudyConfig(seed=0, out_dir=str(tmp_path), gpd_threshold_quantile=1.5)

    def test_unknown_model(self, tmp_path):
        with pytest.raises(PipelineError, match="unknown model"):
            StudyConfig(seed=0, out_dir=str(tmp_path), models=["gumbel"])

    def test_yaml_round_trip(self, tmp_path):
        doc = {
            "seed": 11,
            "out_dir": str(tmp_path / "out"),
            "synthesis": {
                "marginals": {
                    "hs": {"dist": "weibull", "params": {"c": 1.5, "scale": 2.0}},
                    "ws": {"dist": "weibull", "params": {"c": 1.9, "scale": 9.0}},
                },
                "correlation": [[1.0, 0.6], [0.6, 1.0]],
                "ar_coefficient": 0.5,
                "n_steps": 1000,
            },
            "variables": ["hs", "ws"],
            "decluster": {"storm_threshold_quantile": 0.95, "separation_hours": 24.0},
            "monte_carlo_n": 5000,
            "metamodel": {
                "pretension": 100.0, "alpha_h": 1.0, "alpha_w": 0.0, "alpha_c": 0.0,
                "a_lf": 0.1, "b_lf": 0.0, "a_hf": 1.0, "b_hf": 0.0, "c_hf": 0.0,
                "d_hf": 0.0,
                "gumbel_lf": {"mode": 3.0, "scale": 0.8},
                "gumbel_hf": {"mode": 3.5, "scale": 0.6},
            },
        }
        path = tmp_path / "study.yaml"
        path.write_text(yaml.safe_dump(doc))
        cfg = load_study_config(path)
        assert cfg.seed == 11
        assert cfg.variables == ["hs", "ws"]
        assert cfg.decluster.separation_hours == 24.0
        assert cfg.synthesis.ar_coefficient == 0.5
        assert cfg.metamodel.pretension == 100.0
        np.testing.assert_allclose(
            cfg.synthesis.correlation, [[1.0, 0.6], [0.6, 1.0]]
        )

    def test_metamodel_from_json_path(self, tmp_path):
        params = default_synthetic_params()
        params.to_json(tmp_path / "mm.json")
        doc = {"seed": 1, "out_dir": str(tmp_path), "metamodel": "mm.json"}
        path = tmp_path / "study.yaml"
        path.write_text(yaml.safe_dump(doc))
        cfg = load_study_config(path)
        assert cfg.metamodel == params


class TestFitAllModels:
    def test_all_variants(self, small_events, small_margins, tmp_path):
        cfg = StudyConfig(seed=0, out_dir=str(tmp_path), nataf_tail_quantile=0.6)
        models = fit_all_models(small_events, small_margins, cfg)
        assert set(models) == set(MODEL_NAMES)
        assert models["independence"].kind == "independence"
        assert models["nataf"].corr.shape == (3, 3)
        assert 0.0 < models["logistic"].alpha <= 1.0
        assert models["conditional_extremes"].a.shape == (3, 3)

    def test_model_subset(self, small_events, small_margins, tmp_path):
        cfg = StudyConfig(
            seed=0, out_dir=str(tmp_path),
            models=["independence", "perfect_dependence"],
        )
        models = fit_all_models(small_events, small_margins, cfg)
        assert set(models) == {"independence", "perfect_dependence"}


class TestRunStudy:
    def test_artifacts_written(self, small_study):
        out, _ = small_study
        expected = (
            ["margins.json", "report.json", "report.txt",
             "reference_return_levels.json", "quantile_compare.json",
             "stats_series.json"]
            + [f"model_{m}.json" for m in MODEL_NAMES]
            + [f"contour_{m}_T100.json" for m in MODEL_NAMES]
            + [f"stats_hist_{v}.json" for v in ("hs", "ws", "cs")]
        )
        for name in expected:
            assert (out / name).exists(), name

    def test_report_schema_and_contents(self, small_study):
        _, report = small_study
        assert report["schema"] == "envcontours/study-report/1"
        assert set(report["methods"]) == set(MODEL_NAMES)
        for per in report["methods"].values():
            row = per["100.0"]
            assert set(row["design_point"]) == {"hs", "ws", "cs"}
            assert row["tension_kn"] > 0
        assert len(report["quantile_check"]) == 2

    def test_reference_consistent_with_curve(self, small_study):
        out, report = small_study
        doc = json.loads((out / "reference_return_levels.json").read_text())
        assert doc["schema"] == "envcontours/return-level-curve/1"
        ref = report["reference_kn"]["100.0"]
        match = [r for r in doc["rows"] if r["T"] == 100.0]
        assert len(match) == 1
        assert match[0]["level"] == pytest.approx(ref, abs=1e-9)
        assert match[0]["ci_low"] <= ref <= match[0]["ci_high"]

    def test_saved_models_load(self, small_study):
        out, _ = small_study
        for name in MODEL_NAMES:
            model = dep.load_model(out / f"model_{name}.json")
            assert model.kind == name

    def test_contour_surfaces_convex(self, small_study):
        out, _ = small_study
        from envcontours.contour import ContourSurface

        doc = json.loads((out / "contour_nataf_T100.json").read_text())
        surf = ContourSurface.from_dict(doc)
        slack = surf.directions @ surf.vertices.T - surf.c_values[:, None]
        assert np.max(slack) <= 1e-9
        assert surf.return_period == 100.0

    def test_stage_name_in_error(self, tmp_path):
        cfg = StudyConfig(seed=0, out_dir=str(tmp_path), input_csv="missing.csv")
        with pytest.raises(PipelineError, match="stage 'load'"):
            run_study(cfg)

    def test_rerun_identical(self, small_study, tmp_path):
        out, _ = small_study
        out2 = tmp_path / "rerun"
        run_study(_small_config(out2))
        assert (out / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


class TestFormatReport:
    def _report(self):
        return {
            "schema": "envcontours/study-report/1",
            "variables": ["hs", "ws", "cs"],
            "reference_kn": {"100.0": 3800.0},
            "methods": {
                "independence": {"100.0": {
                    "tension_kn": 3557.0, "relative_error": -0.064,
                    "relative_error_pct": -6,
                    "design_point": {"hs": 10.0, "ws": 25.0, "cs": 1.2},
                }},
            },
        }

    def test_table_layout(self):
        text = format_report_tables(self._report())
        lines = text.splitlines()
        assert lines[0] == "100.0-year return level"
        assert "Method" in lines[1] and "Tension (kN)" in lines[1]
        assert lines[2].startswith("Meta model") and "3800" in lines[2]
        assert lines[3].startswith("independence") and "3557" in lines[3]
        assert any(ln.startswith("Method") and "hs" in ln for ln in lines[4:])
        assert any("10.00" in ln and "25.00" in ln for ln in lines)


class TestDescriptiveStats:
    def test_counts_and_schemas(self, small_dataset, params, tmp_path):
        written = emit_descriptive_stats(
            small_dataset, params, tmp_path, ["hs", "ws", "cs"]
        )
        # 3 histograms + 3 pairwise densities + 1 series extract
        assert len(written) == 7
        schemas = set()
        for path in written:
            schemas.add(json.loads(open(path).read())["schema"])
        assert schemas == {
            "envcontours/hist/1", "envcontours/density/1", "envcontours/series/1"
        }

    def test_series_window(self, small_dataset, params, tmp_path):
        written = emit_descriptive_stats(
            small_dataset, params, tmp_path, ["hs"], series_window=24
        )
        doc = json.loads(open(written[-1]).read())
        assert len(doc["timestamps"]) == 24
        assert len(doc["response"]) == 24

    def test_empty_variables(self, small_dataset, params, tmp_path):
        with pytest.raises(PipelineError, match="empty"):
            emit_descriptive_stats(small_dataset, params, tmp_path, [])

    def test_bad_bandwidth(self, small_dataset, params, tmp_path):
        with pytest.raises(PipelineError, match="bandwidth"):
            emit_descriptive_stats(
                small_dataset, params, tmp_path, ["hs"], bandwidth=-1.0
            )


class TestCli:
    def test_synth_writes_csv(self, tmp_path):
        runner = CliRunner()
        out = tmp_path / "env.csv"
        res = runner.invoke(
            cli_main, ["synth", "--seed", "3", "--out", str(out), "--years", "0.1"]
        )
        assert res.exit_code == 0, res.output
        lines = out.read_text().splitlines()
        assert len(lines) - 1 == int(round(0.1 * 8766))
        assert (tmp_path / "env.csv.gaps.json").exists()

    def test_design_point_command(self, tmp_path):
        from envcontours.contour import ContourSurface, halfspaces_to_surface

        dirs = np.vstack([np.eye(3), -np.eye(3)])
        c = np.array([8.0, 20.0, 1.0, 0.0, 0.0, 0.0])
        verts, facets = halfspaces_to_surface(
            dirs, c, interior_point=np.array([4.0, 10.0, 0.5])
        )
        surf = ContourSurface(
            directions=dirs, c_values=c, vertices=verts, facets=facets,
            exceedance_prob=0.01, return_period=100.0,
            variables=["hs", "ws", "cs"],
        )
        path = tmp_path / "surf.json"
        surf.save(path)
        res = CliRunner().invoke(cli_main, ["design-point", "--surface", str(path)])
        assert res.exit_code == 0, res.output
        doc = json.loads(res.output)
        assert doc["location"]["hs"] == pytest.approx(8.0, abs=1e-9)
        assert doc["response_kn"] > 2000.0

    def test_study_requires_seed_and_out(self):
        res = CliRunner().invoke(cli_main, ["study"])
        assert res.exit_code != 0
        assert "--seed" in res.output


class TestReferenceReturnLevel:
    def test_matches_closed_form(self):
        fit = GpdFit(threshold=3000.0, scale=150.0, shape=-0.1,
                     exceedance_rate=5.0, n_exceedances=60, loglik=0.0)
        lvl = return_level(fit, 100.0)
        expect = 3000.0 + 150.0 / -0.1 * (500.0**-0.1 - 1.0)
        assert lvl == pytest.approx(expect, abs=1e-9)
