import json
import os

import pytest

from letrack.cli import main
from letrack.io import load_tracks


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    """A small synthesized dataset shared by the tests in this module."""
    d = tmp_path_factory.mktemp("synthdata")
    cfg = d / "synth.cfg"
    cfg.write_text("seed = 3\nnum_frames = 8\nnum_tracks = 4\n")
    rc = main(
        [
            "synth",
            "--config", str(cfg),
            "--out-gt", str(d / "gt.json"),
            "--out-dets", str(d / "dets.json"),
            "--out-bank", str(d / "bank.json"),
        ]
    )
    assert rc == 0
    return d


def test_synth_writes_three_files(synth_dir):
    for name in ("gt.json", "dets.json", "bank.json"):
        data = (synth_dir / name).read_bytes()
        assert data.endswith(b"\n")
        json.loads(data)


def test_synth_is_deterministic(synth_dir, tmp_path):
    cfg = tmp_path / "synth.cfg"
    cfg.write_text("seed = 3\nnum_frames = 8\nnum_tracks = 4\n")
    rc = main(
        [
            "synth",
            "--config", str(cfg),
            "--out-gt", str(tmp_path / "gt.json"),
            "--out-dets", str(tmp_path / "dets.json"),
            "--out-bank", str(tmp_path / "bank.json"),
        ]
    )
    assert rc == 0
    for name in ("gt.json", "dets.json", "bank.json"):
        assert (tmp_path / name).read_bytes() == (synth_dir / name).read_bytes()


def test_track_then_eval_pipeline(synth_dir, tmp_path, capsys):
    out = tmp_path / "pred.json"
    rc = main(
        [
            "track",
            "--detections", str(synth_dir / "dets.json"),
            "--bank", str(synth_dir / "bank.json"),
            "--out", str(out),
        ]
    )
    captured = capsys.readouterr()
    assert rc == 0
    assert "tracked 1 sequence(s), 4 track(s)" in captured.err
    assert captured.out == ""  # progress goes to stderr

    pred, _ = load_tracks(str(out))
    assert len(pred[0].tracks) == 4
    for t in pred[0].tracks:
        assert t.category_id is not None
        assert t.score == 1.0  # unanimous votes on clean data

    rc = main(
        [
            "eval",
            "--gt", str(synth_dir / "gt.json"),
            "--pred", str(out),
            "--bank", str(synth_dir / "bank.json"),
        ]
    )
    captured = capsys.readouterr()
    assert rc == 0
    lines = captured.out.splitlines()
    assert lines[0].split()[:3] == ["HOTAall", "DETAall", "AssAall"]
    row = lines[1].split()
    assert row[0] == "pred"  # basename of the pred file
    assert row[1] == "100.0"
    assert lines[2].startswith("LocA: all=100.0")


def test_track_without_bank_leaves_tracks_unlabeled(synth_dir, tmp_path):
    out = tmp_path / "pred.json"
    rc = main(
        ["track", "--detections", str(synth_dir / "dets.json"), "--out", str(out)]
    )
    assert rc == 0
    pred, _ = load_tracks(str(out))
    assert all(t.category_id is None and t.score is None for t in pred[0].tracks)


def test_track_accepts_config(synth_dir, tmp_path):
    cfg = tmp_path / "tracker.cfg"
    cfg.write_text("match_threshold = 0.7\nmax_lost_frames = 5\n")
    rc = main(
        [
            "track",
            "--detections", str(synth_dir / "dets.json"),
            "--config", str(cfg),
            "--out", str(tmp_path / "pred.json"),
        ]
    )
    assert rc == 0


def test_track_bad_config_key(synth_dir, tmp_path, capsys):
    cfg = tmp_path / "tracker.cfg"
    cfg.write_text("match_treshold = 0.7\n")
    rc = main(
        [
            "track",
            "--detections", str(synth_dir / "dets.json"),
            "--config", str(cfg),
            "--out", str(tmp_path / "pred.json"),
        ]
    )
    assert rc == 1
    assert "error:" in capsys.readouterr().err
    assert not (tmp_path / "pred.json").exists()


def test_eval_open_mode_and_report(synth_dir, tmp_path, capsys):
    pred = tmp_path / "mytracks.json"
    assert main(
        [
            "track",
            "--detections", str(synth_dir / "dets.json"),
            "--bank", str(synth_dir / "bank.json"),
            "--out", str(pred),
        ]
    ) == 0
    capsys.readouterr()
    report1 = tmp_path / "r1.json"
    rc = main(
        [
            "eval",
            "--gt", str(synth_dir / "gt.json"),
            "--pred", str(pred),
            "--bank", str(synth_dir / "bank.json"),
            "--mode", "open",
            "--alphas", "0.25,0.5,0.75",
            "--report", str(report1),
        ]
    )
    captured = capsys.readouterr()
    assert rc == 0
    assert captured.out.splitlines()[0].split()[0] == "OWTAall"
    assert captured.out.splitlines()[1].split()[0] == "mytracks"
    assert f"report -> {report1}" in captured.err

    obj = json.loads(report1.read_bytes())
    assert obj["mode"] == "open"
    assert obj["alphas"] == [0.25, 0.5, 0.75]

    report2 = tmp_path / "r2.json"
    rc = main(
        [
            "eval",
            "--gt", str(synth_dir / "gt.json"),
            "--pred", str(pred),
            "--bank", str(synth_dir / "bank.json"),
            "--mode", "open",
            "--alphas", "0.25,0.5,0.75",
            "--report", str(report2),
        ]
    )
    assert rc == 0
    assert report1.read_bytes() == report2.read_bytes()


def test_eval_bad_alphas(synth_dir, tmp_path, capsys):
    rc = main(
        [
            "eval",
            "--gt", str(synth_dir / "gt.json"),
            "--pred", str(synth_dir / "gt.json"),
            "--bank", str(synth_dir / "bank.json"),
            "--alphas", "0.5,zebra",
        ]
    )
    assert rc == 1
    assert "invalid alpha value 'zebra'" in capsys.readouterr().err


def test_eval_rejects_out_of_range_alphas(synth_dir, capsys):
    rc = main(
        [
            "eval",
            "--gt", str(synth_dir / "gt.json"),
            "--pred", str(synth_dir / "gt.json"),
            "--bank", str(synth_dir / "bank.json"),
            "--alphas", "0.5,1.0",
        ]
    )
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_validate_happy_paths(synth_dir, capsys):
    for kind, name in (("tracks", "gt.json"), ("detections", "dets.json"), ("bank", "bank.json")):
        rc = main(["validate", "--file", str(synth_dir / name), "--kind", kind])
        assert rc == 0
        assert f"is a valid {kind} file" in capsys.readouterr().err


def test_validate_wrong_kind(synth_dir, capsys):
    rc = main(["validate", "--file", str(synth_dir / "bank.json"), "--kind", "tracks"])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_validate_strict_vs_lax(tmp_path, capsys):
    p = tmp_path / "t.json"
    p.write_text(
        '{"sequences": [{"name": "a", "height": 4, "width": 4, "num_frames": 1,'
        ' "tracks": [], "extra": 1}]}\n'
    )
    assert main(["validate", "--file", str(p), "--kind", "tracks"]) == 1
    assert "unknown field" in capsys.readouterr().err
    assert main(["validate", "--file", str(p), "--kind", "tracks", "--lax"]) == 0
    err = capsys.readouterr().err
    assert "warning:" in err and "unknown field" in err


def test_missing_input_file_exits_2(tmp_path, capsys):
    rc = main(
        ["track", "--detections", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o.json")]
    )
    assert rc == 2
    assert "io error:" in capsys.readouterr().err


def test_invalid_json_exits_1(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{oops")
    rc = main(["validate", "--file", str(p), "--kind", "tracks"])
    assert rc == 1
    assert "invalid JSON" in capsys.readouterr().err


def test_usage_errors_exit_1(capsys):
    assert main([]) == 1
    assert "usage:" in capsys.readouterr().err
    assert main(["track"]) == 1
    err = capsys.readouterr().err
    assert "usage:" in err and "error:" in err
    assert main(["no-such-command"]) == 1
    assert main(["eval", "--mode", "sideways"]) == 1


def test_failed_write_cleans_up_earlier_outputs(synth_dir, tmp_path, capsys):
    rc = main(
        [
            "synth",
            "--out-gt", str(tmp_path / "gt.json"),
            "--out-dets", str(tmp_path / "dets.json"),
            "--out-bank", str(tmp_path / "no" / "such" / "dir" / "bank.json"),
        ]
    )
    assert rc == 2
    assert "io error:" in capsys.readouterr().err
    assert os.listdir(tmp_path) == []


# ---------------------------------------------------------------------------
# import-burst


def burst_doc():
    # 4x4 frames; track 1 is a 2x2 square at the origin, track 2 sits at the
    # opposite corner; column-major runs, first run counts zeros
    sq1 = {"rle": {"counts": [0, 2, 2, 2, 10], "size": [4, 4]}}
    sq2 = {"counts": [10, 2, 2, 2]}
    return {
        "sequences": [
            {
                "seq_name": "clip01",
                "height": 4,
                "width": 4,
                "segmentations": [{"1": sq1, "2": sq2}, {"1": sq1}],
                "track_category_ids": {"1": 3, "2": 7},
            }
        ]
    }


def test_import_burst_converts(tmp_path, capsys):
    src = tmp_path / "burst.json"
    src.write_text(json.dumps(burst_doc()))
    out = tmp_path / "gt.json"
    rc = main(["import-burst", "--input", str(src), "--out", str(out)])
    captured = capsys.readouterr()
    assert rc == 0
    assert "imported 1 sequence(s)" in captured.err

    seqs, warnings = load_tracks(str(out))
    assert warnings == []
    seq = seqs[0]
    assert seq.meta.name == "clip01"
    assert (seq.meta.height, seq.meta.width, seq.meta.num_frames) == (4, 4, 2)
    by_id = {t.track_id: t for t in seq.tracks}
    assert set(by_id) == {1, 2}
    assert by_id[1].category_id == 3
    assert by_id[2].category_id == 7
    assert [ob.frame for ob in by_id[1].observations] == [0, 1]
    assert [ob.frame for ob in by_id[2].observations] == [0]
    ob = by_id[1].observations[0]
    assert ob.box.as_tuple() == (0.0, 0.0, 2.0, 2.0)
    assert ob.mask.counts == (0, 2, 2, 2, 10)
    assert by_id[2].observations[0].box.as_tuple() == (2.0, 2.0, 2.0, 2.0)


def test_import_burst_skips_compressed_masks(tmp_path, capsys):
    doc = burst_doc()
    doc["sequences"][0]["segmentations"][0]["2"] = {"rle": {"counts": "kYW2", "size": [4, 4]}}
    src = tmp_path / "burst.json"
    src.write_text(json.dumps(doc))
    rc = main(["import-burst", "--input", str(src), "--out", str(tmp_path / "gt.json")])
    captured = capsys.readouterr()
    assert rc == 0
    assert "unsupported mask encoding" in captured.err
    seqs, _ = load_tracks(str(tmp_path / "gt.json"))
    assert {t.track_id for t in seqs[0].tracks} == {1}


def test_import_burst_unlabeled_track_warns(tmp_path, capsys):
    doc = burst_doc()
    del doc["sequences"][0]["track_category_ids"]
    src = tmp_path / "burst.json"
    src.write_text(json.dumps(doc))
    rc = main(["import-burst", "--input", str(src), "--out", str(tmp_path / "gt.json")])
    captured = capsys.readouterr()
    assert rc == 0
    assert "has no category id" in captured.err
    seqs, _ = load_tracks(str(tmp_path / "gt.json"))
    assert all(t.category_id is None for t in seqs[0].tracks)


def test_import_burst_nothing_usable(tmp_path, capsys):
    src = tmp_path / "burst.json"
    src.write_text('{"sequences": [{"seq_name": "x", "height": 4, "width": 4}]}')
    rc = main(["import-burst", "--input", str(src), "--out", str(tmp_path / "gt.json")])
    assert rc == 1
    captured = capsys.readouterr()
    assert "no convertible sequences" in captured.err
    assert not (tmp_path / "gt.json").exists()


def test_import_burst_rejects_non_burst_shapes(tmp_path, capsys):
    src = tmp_path / "burst.json"
    src.write_text("[1, 2, 3]")
    rc = main(["import-burst", "--input", str(src), "--out", str(tmp_path / "gt.json")])
    assert rc == 1
    assert "expected an object with a 'sequences' array" in capsys.readouterr().err
