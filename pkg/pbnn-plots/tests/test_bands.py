"""Band loading and the stacked per-model panels."""

import numpy as np
import pytest

from pbnn_plots.bands import BandSeries, load_bands, plot_bands
from pbnn_plots.io import SchemaError

from conftest import BAND_HEADER, write_rows


def test_load_bands_filters_dim_and_keeps_model_file_order(bands_csv):
    bands = load_bands(bands_csv, 0)
    assert [tag for tag, _ in bands] == ["pbnn", "batched"]
    for _, s in bands:
        assert s.t.tolist() == [0, 1, 2]  # sorted even though the file is not
        np.testing.assert_allclose(s.mu_star, s.y_true + 0.1)
        np.testing.assert_allclose(s.sigma_star, 0.5)


def test_load_bands_dim_one_has_its_own_values(bands_csv):
    bands = dict(load_bands(bands_csv, 1))
    np.testing.assert_allclose(bands["pbnn"].sigma_star, 0.6)
    np.testing.assert_allclose(bands["pbnn"].y_true, [1.0, 2.0, 3.0])


def test_unknown_dim_lists_available_dims(bands_csv):
    with pytest.raises(SchemaError, match=r"dim=7.*\[0, 1\]"):
        load_bands(bands_csv, 7)


def test_nonpositive_sigma_is_rejected(tmp_path):
    rows = [("pbnn", 0, 0, 1.0, 1.0, 0.0, "h")]
    path = write_rows(tmp_path / "bad.csv", BAND_HEADER, rows)
    with pytest.raises(SchemaError, match="sigma_star must be positive"):
        load_bands(path, 0)


def test_band_series_rejects_mismatched_lengths():
    with pytest.raises(SchemaError, match="mismatched lengths"):
        BandSeries(np.arange(3.0), np.arange(3.0), np.arange(2.0), np.ones(3))


def test_missing_column_is_a_schema_error(tmp_path):
    path = write_rows(tmp_path / "m.csv", ("model", "dim", "t"), [("pbnn", 0, 0)])
    with pytest.raises(SchemaError, match="missing column"):
        load_bands(path, 0)


def test_plot_draws_one_panel_per_model(tmp_path):
    rows = []
    for model in ("pbnn", "vanilla", "batched", "tempered"):
        for t in range(5):
            rows.append((model, 0, t, 0.0, 0.1, 1.0, "h"))
    path = write_rows(tmp_path / "four.csv", BAND_HEADER, rows)
    out = tmp_path / "four.png"
    fig = plot_bands(path, 0, out)
    assert len(fig.axes) == 4
    assert [ax.get_ylabel() for ax in fig.axes] == ["pbnn", "vanilla", "batched", "tempered"]
    assert out.stat().st_size > 0


def test_single_row_still_renders(tmp_path):
    path = write_rows(tmp_path / "one.csv", BAND_HEADER, [("pbnn", 0, 3, 1.0, 1.1, 0.2, "h")])
    out = tmp_path / "one.png"
    fig = plot_bands(path, 0, out)
    assert len(fig.axes) == 1
    assert out.stat().st_size > 0


def test_vector_output_format(bands_csv, tmp_path):
    out = tmp_path / "bands.pdf"
    plot_bands(bands_csv, 0, out)
    assert out.read_bytes().startswith(b"%PDF")
