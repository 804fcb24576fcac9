"""Posterior summaries and plot-data export.

Location statistics (mean, sd, quantiles, HPD) are computed on sorted copies
so reordering whole chains cannot change them; MC error and ESS keep the
sequential structure they need.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .backends import Trace, flat_names
from .exceptions import TooFewSamples, UnknownVariable

QUANTILES = (2.5, 25.0, 50.0, 75.0, 97.5)


def quantiles(samples, probs=QUANTILES) -> np.ndarray:
    """Linear-interpolation quantiles of the pooled samples (percent units)."""
    x = np.asarray(samples, dtype=np.float64)
    return np.quantile(x, np.asarray(probs) / 100.0, method="linear")


def hpd(samples, alpha: float = 0.05) -> tuple[float, float]:
    """Narrowest interval over sorted samples containing a 1-alpha fraction.

    Among all windows of m = ceil((1-alpha)*n) consecutive order statistics,
    returns the (start, end) values of the minimum-width window, earliest
    start on ties.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    if n < 2:
        raise TooFewSamples("hpd needs at least 2 samples")
    m = min(n, int(math.ceil((1.0 - alpha) * n)))
    widths = x[m - 1:] - x[:n - m + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + m - 1])


def mc_error(samples, batches: int = 20) -> float:
    """Batch-means Monte Carlo standard error of the mean."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    n = x.size
    if n < batches:
        raise TooFewSamples(f"mc_error needs at least {batches} samples, got {n}")
    size = n // batches
    means = x[:batches * size].reshape(batches, size).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(batches))


def ess(samples) -> float:
    """Effective sample size: n / (1 + 2 sum of autocorrelations), with the
    sum truncated by Geyer's initial-positive-sequence rule.  A constant
    series has ESS 0 by convention."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    n = x.size
    if n < 100:
        raise TooFewSamples(f"ess needs at least 100 samples, got {n}")
    x = x - x.mean()
    var0 = float(np.dot(x, x)) / n
    if var0 == 0.0:
        return 0.0
    # autocovariances via FFT
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conjugate(f), nfft)[:n].real / n
    rho = acov / acov[0]
    # Geyer: sum rho over pairs while the pair sums stay positive
    tau = -1.0
    m = 0
    while 2 * m + 1 < n:
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        m += 1
    tau = max(tau, 1e-8)
    return float(n / tau)


@dataclass
class SummaryRow:
    name: str
    mean: float
    sd: float
    mc_error: float
    hpd_lower: float
    hpd_upper: float
    quantiles: dict = field(default_factory=dict)


def _flat_series(trace: Trace, name: str):
    """Yields (flat_name, 1-D series) for each component of a variable."""
    values = trace[name]
    shape = trace.var_shapes[name]
    cols = flat_names(name, shape)
    flat = values.reshape(values.shape[0], -1)
    for j, col in enumerate(cols):
        yield col, flat[:, j]


def _resolve_vars(trace: Trace, vars):
    if vars is None:
        return trace.names
    out = []
    for v in vars:
        if v not in trace.var_shapes:
            raise UnknownVariable(f"no variable {v!r} in trace")
        out.append(v)
    return out


def _rows_for(trace: Trace, name: str) -> list[SummaryRow]:
    rows = []
    for col, series in _flat_series(trace, name):
        ordered = np.sort(series)
        lo, hi = hpd(ordered)
        q = quantiles(ordered)
        rows.append(SummaryRow(
            name=col,
            mean=float(np.mean(ordered)),
            sd=float(np.std(ordered)),
            mc_error=mc_error(series),
            hpd_lower=lo,
            hpd_upper=hi,
            quantiles={p: float(v) for p, v in zip(QUANTILES, q)},
        ))
    return rows


_STAT_HEADER = ("  Mean             SD               MC Error         95% HPD interval\n"
                "  -------------------------------------------------------------------\n")
_Q_HEADER = ("  2.5            25             50             75             97.5\n"
             "  |--------------|==============|==============|--------------|\n")


def _format_block(name: str, rows: list[SummaryRow]) -> str:
    lines = [f"{name}:", "", _STAT_HEADER.rstrip("\n"), ""]
    for r in rows:
        hpd_str = f"[{r.hpd_lower:.3f}, {r.hpd_upper:.3f}]"
        lines.append(f"  {r.mean:<17.3f}{r.sd:<17.3f}{r.mc_error:<17.3f}{hpd_str}")
    lines += ["", "  Posterior quantiles:", _Q_HEADER.rstrip("\n"), ""]
    for r in rows:
        q = [r.quantiles[p] for p in QUANTILES]
        lines.append("  " + "".join(f"{v:<15.3f}" for v in q[:4]) + f"{q[4]:.3f}")
    lines.append("")
    return "\n".join(lines)


def summary(trace: Trace, vars=None) -> tuple[list[SummaryRow], str]:
    """Per-component posterior statistics plus the formatted text report."""
    all_rows: list[SummaryRow] = []
    blocks = []
    for name in _resolve_vars(trace, vars):
        rows = _rows_for(trace, name)
        all_rows.extend(rows)
        blocks.append(_format_block(name, rows))
    return all_rows, "\n\n".join(blocks)


def kde(samples, n_points: int = 200):
    """Gaussian kernel density with Scott's bandwidth over the data range
    extended by three bandwidths."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    n = x.size
    bw = float(np.std(x)) * n ** (-1.0 / 5.0)
    if bw <= 0:
        bw = 1e-8
    grid = np.linspace(x.min() - 3.0 * bw, x.max() + 3.0 * bw, n_points)
    dens = np.zeros(n_points)
    norm = 1.0 / (n * bw * math.sqrt(2.0 * math.pi))
    step = max(1, 10 ** 7 // max(n, 1))
    for i in range(0, n_points, step):
        z = (grid[i:i + step, None] - x[None, :]) / bw
        dens[i:i + step] = np.exp(-0.5 * z * z).sum(axis=1) * norm
    return grid, dens


def histogram(samples):
    """Integer-bin histogram: one bin per integer between min and max."""
    x = np.asarray(samples).astype(np.int64)
    lo, hi = int(x.min()), int(x.max())
    values = np.arange(lo, hi + 1)
    counts = np.bincount(x - lo, minlength=hi - lo + 1)
    return values, counts


def traceplot_data(trace: Trace, vars=None) -> dict:
    """Per flattened component: a marginal panel (KDE for real variables,
    integer histogram for discrete) and the sequential draws panel."""
    out = {}
    for name in _resolve_vars(trace, vars):
        dtype = trace.var_dtypes[name]
        for col, series in _flat_series(trace, name):
            panels = {"draws": series}
            if dtype == "int":
                panels["hist"] = histogram(series)
            else:
                panels["density"] = kde(series)
            out[col] = panels
    return out


def write_plot_data(trace: Trace, out_dir: str, vars=None) -> list[str]:
    """One CSV per variable per panel under ``out_dir``; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for col, panels in traceplot_data(trace, vars).items():
        if "density" in panels:
            path = os.path.join(out_dir, f"{col}_density.csv")
            xs, ys = panels["density"]
            with open(path, "w", encoding="utf-8") as f:
                f.write("x,density\n")
                for x, y in zip(xs, ys):
                    f.write(f"{float(x)!r},{float(y)!r}\n")
            written.append(path)
        else:
            path = os.path.join(out_dir, f"{col}_hist.csv")
            xs, ys = panels["hist"]
            with open(path, "w", encoding="utf-8") as f:
                f.write("x,count\n")
                for x, y in zip(xs, ys):
                    f.write(f"{int(x)},{int(y)}\n")
            written.append(path)
        path = os.path.join(out_dir, f"{col}_draws.csv")
        series = panels["draws"]
        with open(path, "w", encoding="utf-8") as f:
            f.write("draw,value\n")
            for i, v in enumerate(series):
                f.write(f"{i},{float(v)!r}\n" if series.dtype.kind == "f"
                        else f"{i},{int(v)}\n")
        written.append(path)
    return written
