from types import SimpleNamespace

import numpy as np
import pytest

from fisheyeseg.errors import DomainError
from fisheyeseg.evaluation import (ObjectScore, aggregate, range_map, rasterize_polygon, score_frame,
                                   write_range_map, write_scores)
from fisheyeseg.flow import read_grid

SIZE = (40, 30)


def obj(polygon, oid=1, tag="crossing", distance=3.0, centroid=(3.0, 0.0)):
    return SimpleNamespace(object_id=oid, tag=tag, polygon=np.asarray(polygon, float),
                           distance=distance, centroid=centroid)


RECT = [(9.5, 4.5), (19.5, 4.5), (19.5, 14.5), (9.5, 14.5)]  # pixels 10..19 x 5..14


def test_rectangle_raster_counts_pixel_centres():
    r = rasterize_polygon(RECT, SIZE)
    assert r.sum() == 100
    assert r[5:15, 10:20].all()


def test_even_odd_fill_leaves_hole():
    # self-overlapping path: outer square traced twice around an inner one
    star = [(0, 0), (10, 0), (10, 10), (0, 10), (0, 0), (3, 3), (3, 7), (7, 7), (7, 3), (3, 3)]
    r = rasterize_polygon([(x + 0.5, y + 0.5) for x, y in star], (12, 12))
    assert not r[5, 5] and r[1, 1]


def test_exact_mask():
    mask = rasterize_polygon(RECT, SIZE)
    (s,) = score_frame(mask, [obj(RECT)]).objects
    assert (s.tpr, s.iou, s.fp) == (1.0, 1.0, 0) and s.detected


def test_empty_mask():
    (s,) = score_frame(np.zeros((30, 40), bool), [obj(RECT)]).objects
    assert s.tpr == 0.0 and not s.detected


def test_half_overlap():
    mask = np.zeros((30, 40), bool)
    mask[5:15, 10:15] = True
    (s,) = score_frame(mask, [obj(RECT)]).objects
    assert s.tpr == 0.5 and s.iou == 0.5


def test_false_positive_area_and_ratio():
    mask = rasterize_polygon(RECT, SIZE)
    mask[0:2, 0:6] = True
    f = score_frame(mask, [obj(RECT)])
    assert f.fp == 12 and f.fp_ratio == 12 / 1200
    assert f.objects[0].iou == pytest.approx(100 / 112)


def test_range_gate_excludes_far_objects_but_not_their_pixels():
    mask = rasterize_polygon(RECT, SIZE)
    f = score_frame(mask, [obj(RECT, distance=9.0)])
    assert f.objects == [] and f.fp == 0


def test_polygon_outside_image_is_an_error():
    with pytest.raises(DomainError):
        score_frame(np.zeros((30, 40), bool), [obj([(100, 100), (110, 100), (110, 110)])])


def test_translation_symmetry(rng):
    mask = rng.random((30, 40)) < 0.3
    f1 = score_frame(mask, [obj(RECT)])
    shifted = np.roll(np.roll(mask, 3, axis=0), 5, axis=1)
    f2 = score_frame(shifted, [obj(np.array(RECT) + [5, 3])])
    a, b = f1.objects[0], f2.objects[0]
    assert (a.tp, a.fn) == (b.tp, b.fn)


def scores(detected, tag="overtaking"):
    return [ObjectScore(1, i, tag, int(d), 1 - int(d), 0, 3.0, (3.0, 0.0)) for i, d in enumerate(detected)]


def test_aggregate_rates():
    assert aggregate(scores([True] * 5))["overtaking"].detection_rate == 1.0
    assert aggregate(scores([True] * 98 + [False] * 2))["overtaking"].detection_rate == 0.98
    assert aggregate(scores([True, False] * 10))["overtaking"].detection_rate == 0.5


def test_aggregate_single_frame_equals_frame_score():
    mask = np.zeros((30, 40), bool)
    mask[5:15, 10:13] = True
    mask[0, 0] = True
    f = score_frame(mask, [obj(RECT)])
    c = aggregate(f.objects)["crossing"]
    assert c.mean_tpr == f.objects[0].tpr and c.mean_iou == f.objects[0].iou


def test_range_map_single_bin():
    rmap = range_map(scores([True] * 4), bin_size=0.5, extent=8.0)
    i, j = int((3.0 + 8.0) / 0.5), int(8.0 / 0.5)
    assert rmap.rate[i, j] == 1.0 and rmap.count[i, j] == 4
    assert np.isnan(rmap.rate).sum() == rmap.rate.size - 1


def test_range_map_never_detected():
    rmap = range_map(scores([False] * 3))
    assert np.nanmax(rmap.rate) == 0.0


def test_report_files(tmp_path):
    mask = rasterize_polygon(RECT, SIZE)
    f = score_frame(mask, [obj(RECT)])
    summary = aggregate(f.objects)
    write_scores(tmp_path / "r.jsonl", [f], summary)
    lines = (tmp_path / "r.jsonl").read_text().splitlines()
    assert len(lines) == 3 and '"kind": "class"' in lines[-1]
    rmap = range_map(f.objects)
    write_range_map(tmp_path / "m.smlg", rmap)
    np.testing.assert_array_equal(np.isnan(read_grid(tmp_path / "m.smlg")), np.isnan(rmap.rate))


def test_iou_never_exceeds_tpr(rng):
    for _ in range(50):
        mask = rng.random((30, 40)) < rng.random()
        f = score_frame(mask, [obj(rng.uniform([0, 0], [40, 30], size=(5, 2)))])
        for s in f.objects:
            assert 0.0 <= s.iou <= s.tpr <= 1.0 or (s.tp + s.fn == 0)


def test_crossing_sweep_near_bins_not_worse_than_far():
    from fisheyeseg.fusion import render_mask
    from fisheyeseg.simulator import preset, simulate

    from helpers import run_pair

    sim = simulate(preset("crossing"))
    objects = []
    for k in range(len(sim.pairs)):
        mask = render_mask(run_pair(sim, k).mask, sim.spec.cell_size, sim.calibration.image_size) > 0
        objects += score_frame(mask, sim.pairs[k].truth.objects, frame=k).objects
    rmap = range_map(objects, bin_size=2.0)
    filled = ~np.isnan(rmap.rate)
    assert filled.any()
    centres_x = rmap.x_min + (np.arange(rmap.rate.shape[0]) + 0.5) * rmap.bin_size
    centres_y = rmap.y_min + (np.arange(rmap.rate.shape[1]) + 0.5) * rmap.bin_size
    dist = np.hypot(*np.meshgrid(centres_x, centres_y, indexing="ij"))
    near = rmap.rate[filled & (dist < 5.0)]
    far = rmap.rate[filled & (dist >= 5.0)]
    assert near.size and far.size
    assert near.mean() >= far.mean()
