import numpy as np
import pytest

from phononcount import counting as C
from phononcount import dynamics as D
from phononcount import fock as F
from phononcount import io
from phononcount.exceptions import SchemaError


def test_trace_round_trip(tmp_path, dev, bath, pulse):
    trace = D.pulse_trace(dev, bath, pulse, np.linspace(0, 2 * pulse.t_pulse, 17))
    path = io.write_trace_csv(tmp_path / "t.csv", trace)
    back = io.read_trace_csv(path)
    assert np.array_equal(back.times, trace.times) and np.array_equal(back.n, trace.n)
    assert np.array_equal(back.segments, trace.segments)


def test_trace_round_trip_with_sigma(tmp_path):
    trace = D.OccupancyTrace([0.0, 1e-7, 2e-7], [0.1, 0.2, 0.3], sigma=[0.01, 0.02, 0.03])
    back = io.read_trace_csv(io.write_trace_csv(tmp_path / "t.csv", trace))
    assert np.array_equal(back.sigma, trace.sigma)


def test_histogram_round_trip(tmp_path, dev, bath, det, pulse):
    for seed in (5, None):
        h = C.synth_histogram(dev, bath, det, pulse, 30.0, seed, (0, 1e-6))
        back = io.read_histogram_csv(io.write_histogram_csv(tmp_path / "h.csv", h))
        assert np.array_equal(back.counts, h.counts) and np.array_equal(back.bin_edges, h.bin_edges)
        assert back.pulse == h.pulse and back.integration_time == h.integration_time
    assert back.counts.dtype.kind == "f"


def test_sweep_csv(tmp_path, dev, bath, det, pulse):
    sweep = F.fock_fidelity_sweep(dev, bath, det, pulse, [1e-8, 1e-4], [1e-3])
    path = io.write_sweep_csv(tmp_path / "s.csv", sweep)
    cols, _ = io.read_table(path, ["t_pulse_s", "t_per_s", "fidelity", "t_fock_s", "trace_defect",
                                   "validity_flag"], text_columns=["validity_flag"])
    assert list(cols["validity_flag"]) == ["ok", "error"]
    assert np.isnan(cols["fidelity"][1]) and cols["fidelity"][0] == sweep.fidelity[0, 0]


@pytest.mark.parametrize("text, match", [
    ("", "empty file"),
    ("t_s\n1\n", "missing column"),
    ("t_s,n,extra\n1,2,3\n", "unexpected column"),
    ("t_s,n\n", "no data rows"),
    ("t_s,n\n0,1\n1\n", r":3: expected 2 fields"),
    ("# comment\nt_s,n\n0,1\n1,abc\n", r":4: column n: not a number"),
    ("t_s,n\n1,0\n0,1\n", "increasing"),
])
def test_schema_errors_name_the_line(tmp_path, text, match):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(SchemaError, match=match):
        io.read_trace_csv(path)


def test_histogram_missing_metadata(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("bin_start_s,bin_end_s,counts\n0,1e-8,3\n")
    with pytest.raises(SchemaError, match="integration_time_s"):
        io.read_histogram_csv(path)


def test_points_csv(tmp_path):
    path = io.write_points_csv(tmp_path / "d.csv", "decay", {"t_per_s": [1e-3, 2e-3], "ratio": [0.9, 0.8]})
    cols = io.read_points_csv(path, "decay")
    assert list(cols["ratio"]) == [0.9, 0.8]
    with pytest.raises(SchemaError):
        io.read_points_csv(path, "cw")
    with pytest.raises(ValueError):
        io.read_points_csv(path, "bogus")


def test_write_json_refuses_nan(tmp_path):
    with pytest.raises(ValueError):
        io.write_json(tmp_path / "x.json", {"a": float("nan")})
