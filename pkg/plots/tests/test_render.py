import subprocess
import sys
from pathlib import Path

import pytest

from wbanplots.cli import main
from wbanplots.render import KINDS, PlotError, PlotSpec, read_summary, render

GOLDEN = Path(__file__).parent / "data" / "golden_summary.csv"


class TestRenderKinds:
    @pytest.mark.parametrize("kind", sorted(KINDS))
    def test_renders_all_kinds(self, kind, tmp_path):
        out = render(PlotSpec(GOLDEN, kind, tmp_path / f"{kind}.svg",
                              ("iaa", "or", "pc")))
        assert out.exists()
        body = out.read_text()
        assert "<svg" in body
        assert KINDS[kind]["y"] in body or "text" in body

    @pytest.mark.parametrize("kind", sorted(KINDS))
    def test_rerender_byte_identical(self, kind, tmp_path):
        spec_a = PlotSpec(GOLDEN, kind, tmp_path / "a.svg", ("iaa", "or", "pc"))
        spec_b = PlotSpec(GOLDEN, kind, tmp_path / "b.svg", ("iaa", "or", "pc"))
        render(spec_a)
        render(spec_b)
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    def test_png_rerender_byte_identical(self, tmp_path):
        for name in ("a.png", "b.png"):
            render(PlotSpec(GOLDEN, "energy_time", tmp_path / name, ("iaa",)))
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()

    def test_single_scheme(self, tmp_path):
        out = render(PlotSpec(GOLDEN, "min_sinr_time", tmp_path / "one.svg",
                              ("or",)))
        assert out.exists()

    def test_input_is_read_only(self, tmp_path):
        before = GOLDEN.read_bytes()
        render(PlotSpec(GOLDEN, "energy_time", tmp_path / "x.svg", ("pc",)))
        assert GOLDEN.read_bytes() == before


class TestErrors:
    def test_unknown_kind(self, tmp_path):
        with pytest.raises(PlotError, match="kind"):
            PlotSpec(GOLDEN, "pie", tmp_path / "x.svg", ("iaa",))

    def test_no_schemes(self, tmp_path):
        with pytest.raises(PlotError, match="scheme"):
            PlotSpec(GOLDEN, "energy_time", tmp_path / "x.svg", ())

    def test_absent_scheme_rejected(self, tmp_path):
        with pytest.raises(PlotError, match="not present"):
            render(PlotSpec(GOLDEN, "energy_time", tmp_path / "x.svg",
                            ("nope",)))

    def test_missing_header(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("scheme,time_s\niaa,30\n")
        with pytest.raises(PlotError, match="format"):
            read_summary(bad)

    def test_empty_data(self, tmp_path):
        bad = tmp_path / "empty.csv"
        bad.write_text("# format: wbansim-metrics-v1-summary\nscheme,time_s\n")
        with pytest.raises(PlotError, match="no data"):
            read_summary(bad)

    def test_missing_file(self, tmp_path):
        with pytest.raises(PlotError, match="cannot open"):
            read_summary(tmp_path / "nope.csv")


class TestCli:
    def test_cli_renders(self, tmp_path, capsys):
        code = main(["--kind", "avg_sinr_threshold", "--in", str(GOLDEN),
                     "--out", str(tmp_path / "fig.svg"),
                     "--schemes", "iaa,or"])
        assert code == 0
        assert (tmp_path / "fig.svg").exists()

    def test_cli_error_is_nonzero_with_message(self, tmp_path, capsys):
        code = main(["--kind", "energy_time", "--in", str(tmp_path / "no.csv"),
                     "--out", str(tmp_path / "fig.svg")])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "wbanplots.cli", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "--kind" in proc.stdout


def test_secondary_acceptance(tmp_path):
    """All three figure kinds render from the golden summary and re-render
    byte-identically."""
    ok = True
    for kind in sorted(KINDS):
        a = render(PlotSpec(GOLDEN, kind, tmp_path / f"{kind}_a.svg",
                            ("iaa", "or", "pc")))
        b = render(PlotSpec(GOLDEN, kind, tmp_path / f"{kind}_b.svg",
                            ("iaa", "or", "pc")))
        ok &= a.read_bytes() == b.read_bytes()
    print(f"ACCEPT plots-render: {'PASS' if ok else 'FAIL'}")
    assert ok
