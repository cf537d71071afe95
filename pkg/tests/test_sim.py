"""Scenario loading, the synchronous closed loop, and file outputs."""
import filecmp
import json
import math
import os
from dataclasses import replace

import numpy as np
import pytest
import yaml

from ptzcover import (
    compute_partition,
    emit_outputs,
    load_scenario,
    objective_from_partition,
    quality,
    run,
)
from ptzcover.cli import main
from ptzcover.sim import ScenarioError

from conftest import bundled_path


def mini_doc() -> dict:
    """Two well-separated agents in a 6x6 box; cheap enough to run in-loop."""
    return {
        "name": "mini",
        "omega": [[-3.0, -3.0], [3.0, -3.0], [3.0, 3.0], [-3.0, 3.0]],
        "density": "uniform",
        "dt": 0.01,
        "steps": 5,
        "polygonization": 64,
        "boundary_samples": 128,
        "mode": "ptz",
        "seed": 7,
        "limits": {
            "z_min": 0.3,
            "z_max": 3.8,
            "delta_min_deg": 15.0,
            "delta_max_deg": 35.0,
            "r": 0.02,
        },
        "agents": [
            {"q": [0.2, -0.1], "z": 1.0, "theta_deg": 20.0, "h_deg": 5.0,
             "delta_deg": 25.0},
            {"q": [-0.9, 0.8], "z": 1.4, "theta_deg": -70.0, "h_deg": -8.0,
             "delta_deg": 20.0},
        ],
    }


def write_doc(dirpath, doc) -> str:
    p = dirpath / "scenario.yaml"
    p.write_text(yaml.safe_dump(doc))
    return str(p)


@pytest.fixture(scope="module")
def mini(tmp_path_factory):
    return load_scenario(write_doc(tmp_path_factory.mktemp("mini"), mini_doc()))


@pytest.fixture(scope="module")
def mini_log(mini):
    return run(mini)


class TestLoadScenario:
    def test_bundled_case1(self):
        s = load_scenario(bundled_path("case1"))
        assert s.mode == "ptz"
        assert len(s.agents) == 3
        for st, l in s.agents:
            assert (l.z_min, l.z_max) == (0.3, 3.8)
            assert l.delta_min == pytest.approx(math.radians(15.0), abs=1e-15)
            assert l.delta_max == pytest.approx(math.radians(35.0), abs=1e-15)
            assert l.admits(st)
            assert s.omega.contains(st.q)
        assert s.steps >= 1 and s.dt > 0
        assert s.omega.area > 0

    def test_mini_roundtrip(self, mini):
        assert mini.name == "mini"
        assert len(mini.agents) == 2
        assert mini.seed == 7
        assert mini.gains.K_q == mini.gains.K_h == 1.0
        st0 = mini.agents[0][0]
        assert st0.theta == pytest.approx(math.radians(20.0), abs=1e-15)
        assert st0.r == 0.02
        # uniform density evaluates to 1 everywhere
        assert mini.density(np.array([[0.3, -2.0]]))[0] == 1.0

    def test_density_scaled_uniform(self, tmp_path):
        doc = mini_doc()
        doc["density"] = {"uniform": 2.5}
        s = load_scenario(write_doc(tmp_path, doc))
        assert s.density(np.zeros((1, 2)))[0] == 2.5

    @pytest.mark.parametrize(
        "mutate, match",
        [
            (lambda d: d.update(dt=0.0), "dt: must be positive"),
            (lambda d: d.update(dt=-0.1), "dt: must be positive"),
            (lambda d: d.update(steps=0), "steps: must be >= 1"),
            (lambda d: d.update(polygonization=4), "polygonization"),
            (lambda d: d.update(boundary_samples=32), "boundary_samples"),
            (lambda d: d.update(eps_f=0.0), "eps_f: must be positive"),
            (lambda d: d.update(mode="pan"), "mode: must be"),
            (lambda d: d.update(agents=[]), "agents: need a non-empty list"),
            (lambda d: d.update(density="gaussian"), "density: expected"),
            (lambda d: d.update(omega=[[0, 0], [1, 0]]), "omega"),
            (lambda d: d["agents"][0].pop("z"), "missing field 'z'"),
            (lambda d: d["agents"][0].pop("delta_deg"), "missing field 'delta_deg'"),
            (lambda d: d["agents"][0].update(q=[5.0, 0.0]), "outside omega"),
            (lambda d: d["agents"][0].update(q=[2.8, 0.0]), "leaves omega"),
            (lambda d: d["agents"][0].update(z=4.0), "violates its limits"),
            (lambda d: d["agents"][1].update(h_deg=60.0), "violates its limits"),
            (lambda d: d["limits"].update(z_min=-1.0), "z_min"),
        ],
    )
    def test_rejects_bad_documents(self, tmp_path, mutate, match):
        doc = mini_doc()
        mutate(doc)
        with pytest.raises(ScenarioError, match=match):
            load_scenario(write_doc(tmp_path, doc))

    def test_rejects_r_at_guaranteed_region_bound(self, tmp_path):
        # r == z_min tan(delta_min) would let the guaranteed region vanish
        doc = mini_doc()
        doc["limits"]["r"] = 0.3 * math.tan(math.radians(15.0))
        with pytest.raises(ScenarioError, match="uncertainty radius"):
            load_scenario(write_doc(tmp_path, doc))

    def test_rejects_non_mapping_document(self, tmp_path):
        p = tmp_path / "list.yaml"
        p.write_text("- 1\n- 2\n")
        with pytest.raises(ScenarioError, match="mapping at top level"):
            load_scenario(str(p))

    def test_rejects_invalid_yaml(self, tmp_path):
        p = tmp_path / "broken.yaml"
        p.write_text("agents: [unclosed\n  nope: {")
        with pytest.raises(ScenarioError, match="not valid YAML"):
            load_scenario(str(p))

    def test_rejects_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError, match="cannot read scenario file"):
            load_scenario(str(tmp_path / "nope.yaml"))


class TestRunLoop:
    def test_record_shape(self, mini, mini_log):
        log = mini_log
        assert len(log.records) == mini.steps + 1
        assert [rec.step for rec in log.records] == list(range(mini.steps + 1))
        for rec in log.records:
            assert len(rec.states) == len(rec.controls) == 2
            assert len(rec.cell_areas) == 2
        assert log.final is log.records[-1]
        assert set(log.partitions) == {0, mini.steps}
        assert log.runtime > 0

    def test_zero_step_run(self, mini):
        log = run(replace(mini, steps=0))
        assert len(log.records) == 1
        assert set(log.partitions) == {0}
        states = [st for st, _ in mini.agents]
        lims = [l for _, l in mini.agents]
        part = compute_partition(states, lims, mini.omega, mini.eps_f,
                                 mini.polygonization)
        qvs = [quality(st, l) for st, l in zip(states, lims)]
        want = objective_from_partition(part, qvs, mini.density).H
        assert log.final.report.H == pytest.approx(want, rel=1e-12)

    def test_snapshot_steps_override(self, mini):
        log = run(replace(mini, steps=3), snapshot_steps=[1, 2])
        assert set(log.partitions) == {1, 2}

    def test_determinism_bitwise(self, mini, mini_log):
        again = run(mini)
        assert [r.report.H for r in again.records] == [
            r.report.H for r in mini_log.records
        ]
        for a, b in zip(again.final.states, mini_log.final.states):
            assert np.array_equal(a.q, b.q)
            assert (a.z, a.theta, a.h, a.delta) == (b.z, b.theta, b.h, b.delta)

    def test_states_stay_feasible(self, mini, mini_log):
        for rec in mini_log.records:
            for st, (_, l) in zip(rec.states, mini.agents):
                assert l.admits(st)
                assert mini.omega.contains(st.q)

    def test_mini_is_monotone(self, mini_log):
        assert mini_log.monotonicity_violations == 0
        hs = [r.report.H for r in mini_log.records]
        assert hs[-1] > hs[0]

    def test_fixed_mode_freezes_pan_tilt_zoom_shape(self, mini):
        log = run(replace(mini, mode="fixed"))
        lims = [l for _, l in mini.agents]
        theta0 = [st.theta for st, _ in mini.agents]
        for rec in log.records:
            for i, st in enumerate(rec.states):
                assert st.h == 0.0
                assert st.delta == lims[i].delta_min
                assert st.theta == theta0[i]
            for c in rec.controls:
                assert c.u_theta == c.u_h == c.u_delta == 0.0

    def test_effective_norm_matches_final_snapshot(self, mini, mini_log):
        from ptzcover.sim import _effective_norm

        log = mini_log
        lims = [l for _, l in mini.agents]
        want = _effective_norm(
            list(log.final.states), list(log.final.controls), mini.dt, lims,
            mini.omega,
        )
        assert log.effective_norm == want


def ring_area(ring):
    """Shoelace area of a closed CCW ring given as [[x, y], ...]."""
    pts = np.asarray(ring, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def region_doc_area(pieces) -> float:
    total = 0.0
    for piece in pieces:
        total += ring_area(piece["outer"])
        # holes are stored CCW as well, so subtract their magnitude
        total -= sum(abs(ring_area(h)) for h in piece["holes"])
    return total


@pytest.fixture(scope="module")
def emitted(mini_log, tmp_path_factory):
    out = tmp_path_factory.mktemp("emitted")
    paths = emit_outputs(mini_log, str(out))
    return out, paths


class TestEmitOutputs:
    def test_written_file_set(self, emitted):
        out, paths = emitted
        names = {os.path.basename(p) for p in paths}
        assert names == {
            "trajectories.csv", "objective.csv", "partition_0.json",
            "partition_5.json", "summary.json",
        }
        assert all(os.path.isfile(p) for p in paths)

    def test_trajectories_rows(self, mini, mini_log, emitted):
        out, _ = emitted
        lines = (out / "trajectories.csv").read_text().strip().split("\n")
        assert lines[0] == "step,agent,x,y,z,theta,h,delta"
        assert len(lines) == 1 + (mini.steps + 1) * 2
        first = lines[1].split(",")
        assert first[:2] == ["0", "0"]
        st0 = mini_log.records[0].states[0]
        assert float(first[2]) == st0.q[0]
        assert float(first[6]) == st0.h
        assert lines[-1].split(",")[0] == str(mini.steps)

    def test_objective_column_roundtrips(self, mini_log, emitted):
        out, _ = emitted
        lines = (out / "objective.csv").read_text().strip().split("\n")
        assert lines[0].startswith("step,H,per_agent_0,per_agent_1")
        hs = [float(ln.split(",")[1]) for ln in lines[1:]]
        assert hs == [r.report.H for r in mini_log.records]

    @pytest.mark.parametrize("step_key", [0, 5])
    def test_partition_json_areas_match_records(self, mini_log, emitted, step_key):
        out, _ = emitted
        doc = json.loads((out / f"partition_{step_key}.json").read_text())
        assert doc["step"] == step_key
        rec = mini_log.records[step_key]
        assert len(doc["cells"]) == len(rec.cell_areas)
        for pieces, want in zip(doc["cells"], rec.cell_areas):
            assert region_doc_area(pieces) == pytest.approx(want, abs=1e-9)
        for cdoc, want in zip(doc["common"], rec.common_areas):
            assert region_doc_area(cdoc["polygons"]) == pytest.approx(want, abs=1e-9)
        assert region_doc_area(doc["neutral"]) == pytest.approx(
            rec.neutral_area, abs=1e-9
        )

    def test_summary_contents(self, mini, mini_log, emitted):
        out, _ = emitted
        doc = json.loads((out / "summary.json").read_text())
        assert doc["scenario"] == "mini"
        assert doc["mode"] == "ptz"
        assert doc["n_agents"] == 2
        assert doc["steps"] == mini.steps
        assert doc["final_H"] == mini_log.final.report.H
        assert doc["converged"] == mini_log.converged
        assert doc["monotonicity_violations"] == mini_log.monotonicity_violations
        assert len(doc["final_states"]) == 2
        assert doc["final_states"][1]["z"] == mini_log.final.states[1].z

    def test_rerun_emits_identical_bytes(self, mini, mini_log, emitted, tmp_path):
        out, paths = emitted
        emit_outputs(run(mini), str(tmp_path))
        for p in paths:
            assert filecmp.cmp(p, str(tmp_path / os.path.basename(p)),
                               shallow=False), os.path.basename(p)


class TestCLI:
    @pytest.fixture()
    def mini_path(self, tmp_path):
        doc = mini_doc()
        doc["steps"] = 2
        return write_doc(tmp_path, doc)

    def test_run_subcommand(self, mini_path, tmp_path, capsys):
        out = tmp_path / "o"
        assert main(["run", mini_path, "--out", str(out)]) == 0
        assert (out / "summary.json").is_file()
        assert (out / "partition_2.json").is_file()
        assert "final H" in capsys.readouterr().out

    def test_run_bundled_name_with_overrides(self, tmp_path):
        out = tmp_path / "o"
        assert main(["run", "case1", "--steps", "1", "--out", str(out)]) == 0
        doc = json.loads((out / "summary.json").read_text())
        assert doc["steps"] == 1 and doc["n_agents"] == 3

    def test_out_dir_from_environment(self, mini_path, tmp_path, monkeypatch):
        env_out = tmp_path / "from_env"
        monkeypatch.setenv("PTZCOVER_OUT", str(env_out))
        assert main(["run", mini_path]) == 0
        assert (env_out / "summary.json").is_file()

    def test_compare_subcommand(self, mini_path, tmp_path):
        out = tmp_path / "cmp"
        assert main(["compare", mini_path, "--out", str(out)]) == 0
        doc = json.loads((out / "comparison.json").read_text())
        assert set(doc) >= {"final_H_ptz", "final_H_fixed", "ratio"}
        # shared feasible start, so two steps of ascent cannot leave the PTZ
        # run behind the frozen one by more than roundoff
        assert doc["final_H_ptz"] >= doc["final_H_fixed"] - 1e-9
        assert (out / "ptz" / "summary.json").is_file()
        assert (out / "fixed" / "summary.json").is_file()

    def test_oracle_subcommand(self, mini_path, capsys):
        assert main(["oracle", mini_path, "--resolution", "256"]) == 0
        out = capsys.readouterr().out
        assert "relative difference" in out

    def test_check_gradients_subcommand(self, mini_path, capsys):
        rc = main([
            "check-gradients", mini_path, "--samples", "1",
            "--resolution", "128", "--step", "0.02",
        ])
        assert rc == 0
        assert "worst per-channel mismatch" in capsys.readouterr().out

    def test_bad_scenario_exits_2(self, tmp_path, capsys):
        doc = mini_doc()
        doc["dt"] = -1.0
        rc = main(["run", write_doc(tmp_path, doc)])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_unknown_bundled_name_exits_2(self, capsys):
        assert main(["run", "nope"]) == 2
        assert "neither a file nor a bundled scenario" in capsys.readouterr().err

    def test_rejects_bad_override(self, mini_path):
        assert main(["run", mini_path, "--steps", "0"]) == 2
