"""Acceptance: golden-manifest determinism on a symbol-error sweep CSV."""

import os

from plotkit.figures import FigureSpec, render

DATA = os.path.join(os.path.dirname(__file__), "data", "sep_sweep.csv")


def test_criterion_10_golden_manifest(tmp_path):
    """Repeated renders are byte-identical; one series per (scheme, M) group."""
    spec = FigureSpec(inputs=[DATA], x="px_dbw", y=["sep_mc"],
                      out=str(tmp_path / "sep.png"),
                      manifest=str(tmp_path / "sep.manifest.txt"),
                      group_by=["scheme", "m"],
                      yerr={"sep_mc": "sep_mc_stderr"}, y_scale="log")
    series = render(spec)
    first = open(spec.manifest, "rb").read()
    for _ in range(3):
        render(spec)
        assert open(spec.manifest, "rb").read() == first

    groups = {(row.split()[1], row.split()[2])
              for row in first.decode().splitlines() if row.startswith("series:")}
    assert groups == {("scheme=ncds", "m=16"), ("scheme=ncds", "m=64")}
    assert len(series) == len(groups)
    print("\n[criterion 10] golden manifest byte-identical with one series "
          "per (scheme, M): PASS")
