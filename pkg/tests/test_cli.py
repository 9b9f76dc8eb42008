import json
import os
from pathlib import Path

import numpy as np
import pytest

from fisheyeseg.cli import PipelineConfig, UsageError, main, run_evaluate
from fisheyeseg.evaluation import rasterize_polygon
from fisheyeseg.flow import read_flow, read_grid
from fisheyeseg.fusion import read_pgm, write_pgm
from fisheyeseg.simulator import SceneSpec, read_frames, read_ground_truth

GOLDEN = Path(__file__).parent / "data" / "golden"


def simulate(out, *extra):
    assert main(["simulate", "--out", str(out), *extra]) == 0
    return out


@pytest.fixture(scope="module")
def crossing(tmp_path_factory):
    return simulate(tmp_path_factory.mktemp("crossing") / "data", "--preset", "crossing", "--frames", "6")


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(Path(root).rglob("*")) if p.is_file()}


def test_simulate_writes_dataset(crossing):
    names = set(os.listdir(crossing))
    assert {"calibration.ini", "mounting.ini", "odometry.txt", "scene.json", "frames.txt",
            "groundtruth.jsonl", "polygons.txt", "flow", "labels"} <= names
    assert len(read_frames(crossing / "frames.txt")) == 5


def test_simulate_is_deterministic_with_seed(tmp_path):
    a = simulate(tmp_path / "a", "--preset", "overtaking", "--frames", "3", "--noise", "0.5", "--seed", "7")
    b = simulate(tmp_path / "b", "--preset", "overtaking", "--frames", "3", "--noise", "0.5", "--seed", "7")
    assert tree_bytes(a) == tree_bytes(b)


def test_noise_only_touches_valid_pixels(tmp_path):
    clean = simulate(tmp_path / "c", "--preset", "overtaking", "--frames", "2")
    noisy = simulate(tmp_path / "n", "--preset", "overtaking", "--frames", "2", "--noise", "0.5", "--seed", "1")
    f0 = read_flow(clean / "flow" / "flow_00000.smfl")
    f1 = read_flow(noisy / "flow" / "flow_00000.smfl")
    np.testing.assert_array_equal(np.isnan(f0), np.isnan(f1))
    valid = ~np.isnan(f0)
    # a handful of draws fall below one float32 ulp
    assert np.mean(f0[valid] != f1[valid]) > 0.999


def test_unknown_preset_exits_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--preset", "flying", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_bad_weights_exit_2(crossing, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["segment", "--data", str(crossing), "--out", str(tmp_path), "--weights", "1,1"])
    assert exc.value.code == 2


def test_missing_inputs_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["segment", "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "o")])
    assert exc.value.code == 2


def test_static_world_gives_empty_masks(tmp_path):
    scene = tmp_path / "static.json"
    scene.write_text(json.dumps(SceneSpec("static", host_speed=5.0, n_frames=4).to_dict()))
    data = simulate(tmp_path / "d", "--scene", str(scene))
    out = tmp_path / "seg"
    assert main(["segment", "--data", str(data), "--out", str(out)]) == 0
    masks = sorted(out.glob("mask_*.pgm"))
    assert len(masks) == 3
    assert all(not read_pgm(m).any() for m in masks)


def test_crossing_gives_moving_masks(crossing, tmp_path):
    out = tmp_path / "seg"
    assert main(["segment", "--data", str(crossing), "--out", str(out), "--jobs", "2"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["totals"]["processed"] == 5 and manifest["skipped"] == []
    assert all(f["moving_cells"] > 0 for f in manifest["frames"])
    scored, summary, _ = run_evaluate(str(out), str(crossing))
    assert summary["crossing"].detection_rate == 1.0


def test_same_config_twice_is_bit_identical(crossing, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["segment", "--data", str(crossing), "--out", str(a)]) == 0
    assert main(["segment", "--data", str(crossing), "--out", str(b), "--jobs", "3"]) == 0
    assert tree_bytes(a) == tree_bytes(b)


def test_missing_flow_is_skipped(crossing, tmp_path):
    data = tmp_path / "d"
    for name, content in tree_bytes(crossing).items():
        (data / name).parent.mkdir(parents=True, exist_ok=True)
        (data / name).write_bytes(content)
    (data / "flow" / "flow_00002.smfl").unlink()
    out = tmp_path / "seg"
    assert main(["segment", "--data", str(data), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert [s["index"] for s in manifest["skipped"]] == [2]
    assert manifest["totals"]["processed"] == 4


def write_masks(truth_dir, out, fill):
    out.mkdir()
    truth = read_ground_truth(truth_dir)
    for idx, *_ in read_frames(truth_dir / "frames.txt"):
        mask = np.zeros((480, 640), bool)
        if fill:
            for o in truth.get(idx, []):
                mask |= rasterize_polygon(o.polygon, (640, 480))
        write_pgm(out / f"mask_{idx:05d}.pgm", mask.astype(np.uint8) * 255)


def test_evaluate_perfect_masks(crossing, tmp_path, capsys):
    write_masks(crossing, tmp_path / "m", fill=True)
    report, rmap = tmp_path / "r.jsonl", tmp_path / "map.smlg"
    assert main(["evaluate", "--masks", str(tmp_path / "m"), "--truth", str(crossing),
                 "--report", str(report), "--range-map", str(rmap)]) == 0
    assert "crossing" in capsys.readouterr().out
    records = [json.loads(line) for line in report.read_text().splitlines()]
    objs = [r for r in records if r["kind"] == "object"]
    assert objs and all(r["tpr"] == 1.0 and r["iou"] == 1.0 for r in objs)
    assert all(r["fp"] == 0 for r in records if r["kind"] == "frame")
    assert np.nanmin(read_grid(rmap)) == 1.0


def test_evaluate_empty_masks(crossing, tmp_path):
    write_masks(crossing, tmp_path / "m", fill=False)
    scored, summary, _ = run_evaluate(str(tmp_path / "m"), str(crossing))
    assert summary["crossing"].detection_rate == 0.0
    assert all(f.fp == 0 for f in scored)


def test_evaluate_without_overlap_exits_1(crossing, tmp_path):
    (tmp_path / "m").mkdir()
    assert main(["evaluate", "--masks", str(tmp_path / "m"), "--truth", str(crossing)]) == 1


def test_config_file(crossing, tmp_path):
    ini = tmp_path / "run.ini"
    rel = os.path.relpath(crossing, tmp_path)
    ini.write_text(
        "[pipeline]\n"
        f"calibration = {rel}/calibration.ini\n"
        f"mounting = {rel}/mounting.ini\n"
        f"frames = {rel}/frames.txt\n"
        f"odometry = {rel}/odometry.txt\n"
        "output = out\n"
        "threshold = 0.001  # stricter\n"
        "weights = 1,1,0.5,0.5,0\n"
        "lambda_s = 0.03\n"
    )
    cfg = PipelineConfig.from_file(str(ini))
    assert cfg.threshold == 0.001 and cfg.weights.height == 0.5 and cfg.thresholds.lambda_s == 0.03
    assert cfg.output == str(tmp_path / "out")
    cfg.validate()
    d = PipelineConfig.for_dataset(str(crossing), threshold=0.001)
    assert d.digest() != PipelineConfig.for_dataset(str(crossing)).digest()
    (tmp_path / "bad.ini").write_text("[pipeline]\ncalibration = x\n")
    with pytest.raises(UsageError, match="mounting"):
        PipelineConfig.from_file(str(tmp_path / "bad.ini"))


def test_golden_likelihoods(tmp_path):
    """Regression against stored likelihood grids of a short crossing run."""
    data = simulate(tmp_path / "d", "--preset", "crossing", "--frames", "3")
    out = tmp_path / "seg"
    assert main(["segment", "--data", str(data), "--out", str(out)]) == 0
    for golden in sorted(GOLDEN.glob("likelihood_*.smlg")):
        np.testing.assert_allclose(read_grid(out / golden.name), read_grid(golden), rtol=1e-9, atol=1e-12)
        mask = golden.name.replace("likelihood", "mask").replace(".smlg", ".pgm")
        np.testing.assert_array_equal(read_pgm(out / mask), read_pgm(GOLDEN / mask))
    assert len(list(GOLDEN.glob("likelihood_*.smlg"))) == 2
