import math

import pytest

import abfpe


def test_anchor_grid_axis_aligned():
    grid = abfpe.anchor_grid(4, 224)
    assert grid == [(224.0, 112.0), (112.0, 224.0), (0.0, 112.0), (112.0, 0.0)]


def test_nearest_anchor_tie_breaks_low():
    index, dist = abfpe.nearest_anchor(4, 224, 112.0, 112.0)
    assert index == 0
    assert dist == pytest.approx(112.0)


def test_encode_decode_round_trip():
    tips = [(200.0, 112.0), None, (30.0, 40.0), None, (112.0, 220.0)]
    enc = abfpe.encode_targets(24, 224, tips)
    assert enc["mask"] == [True, False, True, False, True]
    assert enc["anchor_class"][1] == 24

    scores = [0.0] * (5 * 25)
    offsets = [0.0] * 10
    for i in range(5):
        scores[i * 25 + enc["anchor_class"][i]] = 1.0
        offsets[i * 2 : i * 2 + 2] = enc["offset"][i]
    decoded = abfpe.decode_predictions(24, 224, scores, offsets)
    for got, want in zip(decoded, tips):
        if want is None:
            assert got is None
        else:
            assert got == pytest.approx(want, abs=1e-9)


def test_schedule_and_loss_values():
    assert abfpe.poly_lr(0) == pytest.approx(1e-2)
    assert abfpe.poly_lr(500, restart_fraction=-1) == pytest.approx(
        5.358867312681e-3, abs=1e-12
    )
    assert abfpe.poly_lr(250) == pytest.approx(6.5e-3, abs=1e-15)
    assert abfpe.huber(0.5, 1.0) == pytest.approx(0.125)
    assert abfpe.huber(2.0, 1.0) == pytest.approx(1.5)


def test_metric_values():
    p, r, f1 = abfpe.precision_recall_f1(3, 1, 2)
    assert (p, r) == (0.75, 0.6)
    assert f1 == pytest.approx(2 / 3, abs=1e-4)
    assert abfpe.iou([0, 0, 2, 2], [1, 0, 3, 2]) == pytest.approx(1 / 3)
    curve = abfpe.cde_curve([1.0, 2.0, 3.0], [2.0])
    assert curve == [(2.0, pytest.approx(2 / 3))]
    match = abfpe.match_fingertips(
        [(0.0, 0.0), (50.0, 50.0), None, None, None],
        [(5.0, 0.0), None, (70.0, 70.0), None, None],
        delta=10.0,
    )
    assert (match["tp"], match["fp"], match["fn"]) == (1, 1, 1)


def test_oracle_pipeline(tmp_path):
    manifest = abfpe.generate_synthetic(
        str(tmp_path / "data"), count=3, seed=5, width=320, height=320
    )
    ckpt = str(tmp_path / "oracle.ckpt")
    abfpe.save_oracle_checkpoint(ckpt)
    report = abfpe.evaluate(ckpt, manifest)
    assert report["images"] == 3
    assert all(t["f1"] == 1.0 for t in report["per_threshold"])
    assert report["avg_pixel_error"] <= 0.5


def test_train_smoke(tmp_path):
    manifest = abfpe.generate_synthetic(
        str(tmp_path / "data"), count=6, seed=9, width=320, height=320
    )
    result = abfpe.train(
        manifest,
        str(tmp_path / "run"),
        epochs=2,
        batch_size=3,
        input_size=32,
        anchor_count=4,
        neck_channels=8,
        backbone_blocks=2,
        augment=False,
    )
    assert result["iterations"] == 4
    assert len(result["epoch_mean_loss"]) == 2
    tips = abfpe.predict_image(
        result["checkpoint"],
        str(tmp_path / "data" / "images" / "00000.png"),
        [0.1, 0.1, 0.9, 0.9],
    )
    assert len(tips) == 5
    assert len(abfpe.FINGER_NAMES) == 5
