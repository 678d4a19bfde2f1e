"""Command-line surface: exit codes, artifacts, determinism, reports."""

import json

import numpy as np
import pytest

from texwave.cli import RunConfig, UsageError, main
from texwave.exceptions import ConvergenceError, DataError
from texwave.experiments import (
    EvalReport,
    font_of,
    font_style_cells,
    manifest_features,
    parse_label_grid,
    report_from_json,
    report_to_json,
    run_train,
    style_of,
    truth_grid_lines,
)
from texwave.imagecore import GrayImage, load_pgm, save_pgm
from texwave.preprocess import BlockGridConfig
from texwave.svm import load_model
from texwave.synth import default_styles, make_collage, render_page


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Small dataset plus a trained model shared by the read-only tests."""
    root = tmp_path_factory.mktemp("cliws")
    data = root / "data"
    assert main(["gen-dataset", "--styles", "3", "--pages", "2", "--seed",
                 "7", "--page-w", "192", "--page-h", "192",
                 "--out", str(data)]) == 0
    model = root / "model.txt"
    assert main(["train", "--manifest", str(data / "manifest.txt"),
                 "--c-grid", "10", "--gamma-grid", "0.1", "--folds", "2",
                 "--seed", "3", "--out", str(model)]) == 0
    return root


class TestExitCodes:
    def test_no_command_is_usage_error(self, capsys):
        assert main([]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_unknown_command_is_usage_error(self):
        assert main(["frobnicate"]) == 1

    def test_unknown_flag_is_usage_error(self):
        assert main(["bench", "--nope", "--out", "x"]) == 1

    def test_bad_flag_value_is_usage_error(self):
        assert main(["evaluate", "--manifest", "m", "--folds", "many",
                     "--out", "r"]) == 1

    def test_out_of_range_flag_is_usage_error(self, tmp_path):
        assert main(["gen-dataset", "--styles", "1",
                     "--out", str(tmp_path)]) == 1

    def test_missing_manifest_is_data_error(self, tmp_path, capsys):
        assert main(["evaluate", "--manifest", str(tmp_path / "nope.txt"),
                     "--out", str(tmp_path / "r.json")]) == 2
        assert "data error" in capsys.readouterr().err

    def test_single_class_manifest_is_data_error(self, tmp_path, capsys):
        page = render_page(default_styles(2)[0], 192, 192, 1)
        (tmp_path / "p0.pgm").write_bytes(save_pgm(page))
        (tmp_path / "manifest.txt").write_text("p0.pgm,only\n")
        assert main(["evaluate", "--manifest",
                     str(tmp_path / "manifest.txt"), "--folds", "2",
                     "--out", str(tmp_path / "r.json")]) == 2
        assert "2 classes" in capsys.readouterr().err

    def test_bad_pages_named_in_data_error(self, tmp_path, capsys):
        # One unreadable page and one with no occupied blocks: the error
        # must name both files.
        styles = default_styles(2)
        good = render_page(styles[0], 192, 192, 1)
        (tmp_path / "good.pgm").write_bytes(save_pgm(good))
        (tmp_path / "broken.pgm").write_bytes(b"P5 not really a pgm")
        white = GrayImage(np.ones((192, 192)))
        (tmp_path / "blank.pgm").write_bytes(save_pgm(white))
        (tmp_path / "manifest.txt").write_text(
            "good.pgm,a\nbroken.pgm,a\nblank.pgm,b\n")
        assert main(["train", "--manifest", str(tmp_path / "manifest.txt"),
                     "--c-grid", "10", "--gamma-grid", "0.1",
                     "--folds", "2", "--out", str(tmp_path / "m.txt")]) == 2
        err = capsys.readouterr().err
        assert "broken.pgm" in err
        assert "blank.pgm" in err

    def test_convergence_failure_maps_to_exit_3(self, monkeypatch, tmp_path,
                                                capsys):
        def explode(*args, **kwargs):
            raise ConvergenceError("solver stalled", worst_violation=0.5)

        monkeypatch.setattr("texwave.cli.run_train", explode)
        assert main(["train", "--manifest", "whatever",
                     "--out", str(tmp_path / "m.txt")]) == 3
        assert "convergence error" in capsys.readouterr().err

    def test_help_exits_zero(self):
        with pytest.raises(SystemExit) as info:
            main(["--help"])
        assert info.value.code == 0


class TestRunConfig:
    @pytest.mark.parametrize("kw", [
        dict(block_w=8),
        dict(ink_threshold=0.0),
        dict(ink_threshold=1.0),
        dict(levels=0),
        dict(levels=7),
        dict(folds=1),
        dict(jobs=0),
        dict(seed=-1),
        dict(svm_c=0.0),
        dict(styles=1),
        dict(pages=0),
        dict(page_w=100),
        dict(runs=0),
        dict(c_grid=(0.5,)),
        dict(gamma_grid=(2.0,)),
        dict(sizes=(8,)),
        dict(transform="fft"),
    ])
    def test_out_of_range_rejected(self, kw):
        with pytest.raises(UsageError):
            RunConfig(command="evaluate", **kw)

    def test_grid_config_defaults_strides(self):
        cfg = RunConfig(command="evaluate", block_w=64, block_h=48)
        grid = cfg.grid_config()
        assert (grid.stride_x, grid.stride_y) == (64, 48)

    def test_echo_excludes_jobs_and_out(self):
        cfg = RunConfig(command="evaluate", manifest="m.txt", jobs=8,
                        out="r.json")
        echo = cfg.echo()
        assert "jobs" not in echo
        assert "out" not in echo
        assert echo["manifest"] == "m.txt"
        assert echo["levels"] == 3


class TestGenDataset:
    def test_expected_file_count(self, tmp_path):
        out = tmp_path / "d"
        assert main(["gen-dataset", "--styles", "2", "--pages", "3",
                     "--page-w", "192", "--page-h", "192", "--seed", "1",
                     "--out", str(out)]) == 0
        pages = sorted(p.name for p in out.glob("*.pgm"))
        assert len(pages) == 6
        assert (out / "manifest.txt").exists()

    def test_emphasis_quadruples_classes(self, tmp_path):
        out = tmp_path / "d"
        assert main(["gen-dataset", "--styles", "2", "--pages", "1",
                     "--emphasis", "--page-w", "192", "--page-h", "192",
                     "--seed", "1", "--out", str(out)]) == 0
        labels = {line.split(",")[1]
                  for line in (out / "manifest.txt").read_text().split()}
        assert labels == {"style0", "style0_i", "style0_b", "style0_bi",
                          "style1", "style1_i", "style1_b", "style1_bi"}


class TestTrainArtifacts:
    def test_model_loads_and_grid_table_shape(self, workspace):
        model = load_model(str(workspace / "model.txt"))
        assert model.classes == ("style0", "style1", "style2")
        lines = (workspace / "model.txt.grid.csv").read_text().splitlines()
        assert lines[0] == "c,gamma,cv_accuracy"
        assert len(lines) == 1 + 1  # header + |c_grid| * |gamma_grid|

    def test_grid_table_full_grid_row_count(self, workspace, tmp_path):
        out = tmp_path / "m.txt"
        assert main(["train", "--manifest",
                     str(workspace / "data" / "manifest.txt"),
                     "--c-grid", "1,10", "--gamma-grid", "0.01,0.1,1",
                     "--folds", "2", "--seed", "3", "--out", str(out)]) == 0
        lines = (tmp_path / "m.txt.grid.csv").read_text().splitlines()
        assert len(lines) == 1 + 2 * 3

    def test_reloaded_model_decisions_bit_identical(self, workspace):
        manifest = str(workspace / "data" / "manifest.txt")
        model, _, _, _ = run_train(manifest, BlockGridConfig(), 3, "dtcwt",
                                   (10.0,), (0.1,), 2, 3)
        reloaded = load_model(str(workspace / "model.txt"))
        table = manifest_features(manifest)
        assert np.array_equal(model.decision_values(table.matrix),
                              reloaded.decision_values(table.matrix))

    def test_dwt_model_layout_and_dim(self, workspace, tmp_path):
        out = tmp_path / "dwt.txt"
        assert main(["train", "--manifest",
                     str(workspace / "data" / "manifest.txt"),
                     "--transform", "dwt", "--c-grid", "10",
                     "--gamma-grid", "0.1", "--folds", "2",
                     "--out", str(out)]) == 0
        model = load_model(str(out))
        assert "orient[h,v,d]" in model.layout
        assert model.standardizer.mean.shape == (18,)


class TestEvaluate:
    def test_report_contents_and_roundtrip(self, workspace, tmp_path):
        out = tmp_path / "r.json"
        assert main(["evaluate", "--manifest",
                     str(workspace / "data" / "manifest.txt"),
                     "--folds", "2", "--seed", "3", "--out", str(out)]) == 0
        text = out.read_text()
        report = report_from_json(text)
        assert isinstance(report, EvalReport)
        assert report.tree_b_rule == "reverse"
        assert set(report.per_class_accuracy) == {"style0", "style1",
                                                  "style2"}
        assert report.config["folds"] == 2
        # Confusion rows sum to per-class block counts pooled over folds.
        table = manifest_features(str(workspace / "data" / "manifest.txt"))
        for i, label in enumerate(report.classes):
            assert sum(report.confusion[i]) == table.labels.count(label)
        assert report_to_json(report_from_json(text)) == text

    def test_rerun_and_jobs_byte_identical(self, workspace, tmp_path):
        manifest = str(workspace / "data" / "manifest.txt")
        outs = []
        for name, jobs in (("a", "1"), ("b", "1"), ("c", "2")):
            out = tmp_path / f"{name}.json"
            assert main(["evaluate", "--manifest", manifest, "--folds", "2",
                         "--seed", "3", "--jobs", jobs,
                         "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]


class TestPredict:
    def test_majority_matches_page_style(self, workspace, capsys):
        page = str(workspace / "data" / "style1_page0.pgm")
        assert main(["predict", "--model", str(workspace / "model.txt"),
                     page]) == 0
        out = capsys.readouterr().out
        assert out.strip().splitlines()[-1] == "majority style1"

    def test_grid_dimensions_match_partition_arithmetic(self, workspace,
                                                        capsys):
        page = str(workspace / "data" / "style0_page0.pgm")
        assert main(["predict", "--model", str(workspace / "model.txt"),
                     page, "--block-w", "96", "--block-h", "96",
                     "--stride-x", "48", "--stride-y", "96"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        grid = [line.split() for line in lines[:-1]]
        assert len(grid) == (192 - 96) // 96 + 1
        assert all(len(row) == (192 - 96) // 48 + 1 for row in grid)

    def test_blank_region_reported_empty(self, workspace, tmp_path, capsys):
        page = render_page(default_styles(3)[0], 192, 192, 5)
        data = page.data.copy()
        data[:96, :96] = 1.0
        path = tmp_path / "partial.pgm"
        path.write_bytes(save_pgm(GrayImage(data)))
        assert main(["predict", "--model", str(workspace / "model.txt"),
                     str(path)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].split()[0] == "EMPTY"
        assert "EMPTY" not in lines[-1]

    def test_all_white_page_reports_no_text(self, workspace, tmp_path,
                                            capsys):
        path = tmp_path / "white.pgm"
        path.write_bytes(save_pgm(GrayImage(np.ones((192, 192)))))
        assert main(["predict", "--model", str(workspace / "model.txt"),
                     str(path)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[-1] == "majority NO_TEXT"
        assert all(cell == "EMPTY" for line in lines[:-1]
                   for cell in line.split())

    def test_transform_mismatch_labeled_error(self, workspace, tmp_path,
                                              capsys):
        out = tmp_path / "dwt.txt"
        main(["train", "--manifest",
              str(workspace / "data" / "manifest.txt"), "--transform",
              "dwt", "--c-grid", "10", "--gamma-grid", "0.1",
              "--folds", "2", "--out", str(out)])
        page = str(workspace / "data" / "style0_page0.pgm")
        assert main(["predict", "--model", str(out), page]) == 2
        err = capsys.readouterr().err
        assert "layout" in err

    def test_out_file_matches_stdout(self, workspace, tmp_path, capsys):
        page = str(workspace / "data" / "style2_page1.pgm")
        out = tmp_path / "pred.txt"
        assert main(["predict", "--model", str(workspace / "model.txt"),
                     page, "--out", str(out)]) == 0
        assert out.read_text() == capsys.readouterr().out


@pytest.fixture(scope="module")
def collage(tmp_path_factory):
    root = tmp_path_factory.mktemp("collage")
    styles = default_styles(3)
    img, rmap = make_collage([styles[0], styles[1]], [[0, 1]], 11,
                             page_width=384, page_height=192)
    path = root / "collage.pgm"
    path.write_bytes(save_pgm(img))
    truth = root / "truth.txt"
    lines = truth_grid_lines(rmap, 384, 192, BlockGridConfig())
    truth.write_text("\n".join(lines) + "\n")
    return root


class TestSegment:
    def test_map_and_accuracy(self, workspace, collage, tmp_path, capsys):
        out = tmp_path / "map.txt"
        assert main(["segment", "--model", str(workspace / "model.txt"),
                     str(collage / "collage.pgm"), "--truth",
                     str(collage / "truth.txt"), "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert "accuracy" in printed
        grid = parse_label_grid(out.read_text())
        assert len(grid) == 2 and len(grid[0]) == 4

    def test_single_style_page_gives_uniform_map(self, workspace, tmp_path):
        out = tmp_path / "map.txt"
        page = str(workspace / "data" / "style2_page0.pgm")
        assert main(["segment", "--model", str(workspace / "model.txt"),
                     page, "--out", str(out)]) == 0
        cells = {cell for row in parse_label_grid(out.read_text())
                 for cell in row}
        assert cells == {"style2"}

    def test_truth_shape_mismatch_is_error(self, workspace, collage,
                                           tmp_path, capsys):
        bad = tmp_path / "truth.txt"
        bad.write_text("style0 style1\n")
        assert main(["segment", "--model", str(workspace / "model.txt"),
                     str(collage / "collage.pgm"), "--truth", str(bad),
                     "--out", str(tmp_path / "map.txt")]) == 2
        assert "grid" in capsys.readouterr().err

    def test_starred_cells_excluded_from_score(self, workspace, collage,
                                               tmp_path, capsys):
        # Replace one truth cell with a wrong label and a star: scoring
        # must skip it, leaving accuracy at 1 over the other 7 blocks.
        lines = (collage / "truth.txt").read_text().splitlines()
        cells = lines[0].split()
        cells[0] = "style1*"
        lines[0] = " ".join(cells)
        bad_star = tmp_path / "truth.txt"
        bad_star.write_text("\n".join(lines) + "\n")
        assert main(["segment", "--model", str(workspace / "model.txt"),
                     str(collage / "collage.pgm"), "--truth", str(bad_star),
                     "--out", str(tmp_path / "map.txt")]) == 0
        printed = capsys.readouterr().out
        assert "accuracy 1.000000 over 7 scored blocks" in printed


class TestAblation:
    def test_report_cells_and_margins(self, tmp_path):
        out = tmp_path / "abl.json"
        assert main(["ablation-dwt", "--pages", "2", "--folds", "4",
                     "--seed", "5", "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        for transform in ("dtcwt", "dwt"):
            cells = payload[transform]["font_style_percent"]
            assert abs(sum(cells.values()) - 100.0) <= 0.01
            assert len(payload[transform]["classes"]) == 8
        assert (payload["dtcwt"]["mean_accuracy"]
                >= payload["dwt"]["mean_accuracy"])
        assert (payload["dwt"]["font_style_percent"]
                ["correct_font_wrong_style"]
                > payload["dtcwt"]["font_style_percent"]
                ["correct_font_wrong_style"])
        assert "jobs" not in payload["config"]


class TestBlockTransfer:
    def test_rows_and_percent_sums(self, workspace, tmp_path):
        out = tmp_path / "bt.json"
        assert main(["block-transfer", "--model",
                     str(workspace / "model.txt"), "--manifest",
                     str(workspace / "data" / "manifest.txt"),
                     "--sizes", "96,144,192", "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert [row["block_size"] for row in payload["rows"]] == [96, 144,
                                                                  192]
        for row in payload["rows"]:
            total = sum(sum(r) for r in row["confusion"])
            assert total == row["n_blocks"]
            percent = sum(sum(r) for r in row["confusion_percent"])
            assert abs(percent - 100.0) < 1e-9


class TestBench:
    def test_schema_and_determinism_of_structure(self, tmp_path):
        out = tmp_path / "bench.json"
        assert main(["bench", "--sizes", "32,64", "--runs", "3",
                     "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert payload["schema"] == "texwave-bench v1"
        assert payload["sizes"] == [32, 64]
        assert set(payload["median_seconds"]) == {"32", "64"}
        assert set(payload["ratios"]) == {"64/32"}
        assert payload["runs"] == 3


class TestFontStyleHelpers:
    @pytest.mark.parametrize("label,font,style", [
        ("serif", "serif", "regular"),
        ("serif_i", "serif", "i"),
        ("serif_b", "serif", "b"),
        ("serif_bi", "serif", "bi"),
    ])
    def test_font_and_style_split(self, label, font, style):
        assert font_of(label) == font
        assert style_of(label) == style

    def test_cells_hand_computed(self):
        classes = ("a", "a_i")
        confusion = [[3, 1], [0, 4]]
        cells = font_style_cells(classes, confusion)
        assert cells["correct_font_correct_style"] == pytest.approx(87.5)
        assert cells["correct_font_wrong_style"] == pytest.approx(12.5)
        assert cells["wrong_font_correct_style"] == 0.0
        assert cells["wrong_font_wrong_style"] == 0.0

    def test_parse_label_grid_rejects_ragged(self):
        with pytest.raises(DataError):
            parse_label_grid("a b\nc\n")
