"""CSV and JSON writers for simulation results."""

import csv
import json
from pathlib import Path

import numpy as np

from .channel import realize
from .scheduler import Direction

SINR_COLUMNS = ["drop", "time_us", "ue", "direction", "layer", "sinr_db", "sinr_eff_db"]
BLER_COLUMNS = ["drop", "time_us", "ue", "direction", "layer", "sinr_db", "bler", "corrupted",
                "mcs", "sinr_eff_db"]
TRACE_COLUMNS = ["drop", "subframe", "bundle", "layer", "ue", "direction", "start_symbol",
                 "n_symbols", "padding_after"]
THROUGHPUT_COLUMNS = ["drop", "ue", "direction", "offered_mbps", "delivered_mbps"]


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_records(path, columns, arrays):
    """Write the named fields of one or more structured arrays as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for arr in arrays:
            cols = [arr[c] for c in columns]
            for row in zip(*cols):
                w.writerow([_cell(v) for v in row])


def throughput_rows(results):
    rows = []
    for r in results:
        for (u, d), offered in sorted(r.offered_bits.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
            rows.append((r.drop_index, u, str(d), offered / r.duration_s / 1e6,
                         r.delivered_bits[(u, d)] / r.duration_s / 1e6))
    return rows


def write_outputs(results, summary, out_dir, config=None):
    """Write every result file into ``out_dir`` and return the paths by name."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "sinr": out / "sinr_samples.csv",
        "bler": out / "bler_samples.csv",
        "trace": out / "schedule_trace.csv",
        "throughput": out / "throughput.csv",
        "summary": out / "summary.json",
    }
    write_records(paths["sinr"], SINR_COLUMNS, [r.sinr_samples for r in results])
    write_records(paths["bler"], BLER_COLUMNS, [r.bler_samples for r in results])
    write_records(paths["trace"], TRACE_COLUMNS, [r.schedule_trace for r in results])
    with open(paths["throughput"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(THROUGHPUT_COLUMNS)
        w.writerows([_cell(v) for v in row] for row in throughput_rows(results))
    doc = summary.to_json()
    if config is not None:
        doc["config"] = config.to_dict()
    with open(paths["summary"], "w") as fh:
        json.dump(doc, fh, indent=2)
    return paths


def write_channel_trace(sim, path, append=False):
    """Dump the subframe-0 channel of every UE in ``sim``, one row per subband.

    ``sim`` is a freshly constructed :class:`~mmwave_hbf.engine.DropSimulator`.
    """
    n_rx = sim.rx_geom.n_elements
    n_tx = sim.tx_geom.n_elements
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        w = csv.writer(fh)
        if not append:
            head = ["drop", "ue", "subband", "pathloss_db"]
            for r in range(n_rx):
                for t in range(n_tx):
                    head += [f"h{r}_{t}_re", f"h{r}_{t}_im"]
            w.writerow(head)
        for u, link in enumerate(sim.links):
            cr = realize(u, link.cs, link.pathloss_db, sim.offsets)
            for k, h in enumerate(cr.matrices):
                flat = np.column_stack([h.real.ravel(), h.imag.ravel()]).ravel()
                w.writerow([sim.drop_index, u, k, repr(float(link.pathloss_db))]
                           + [repr(float(x)) for x in flat])


def format_summary(summary):
    lines = [f"drops: {summary.n_drops}"]
    for d in Direction:
        d = str(d)
        x = summary.sinr_db[d]
        med = f"{np.median(x):.1f} dB" if len(x) else "n/a"
        lines.append(
            f"{d}: delivered {summary.throughput_mbps[d]:.1f} +/- {summary.throughput_stderr[d]:.1f}"
            f" Mbps (offered {summary.offered_mbps[d]:.1f}), median SINR {med},"
            f" {len(x)} TBs")
    lines.append(f"padding fraction: {summary.padding_fraction:.3f}")
    return "\n".join(lines)
