"""SVG figures for simulation traces (matplotlib, headless)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

# fixed id salt and no timestamp so identical traces give identical files
_RC = {"svg.hashsalt": "flexarm", "svg.fonttype": "path", "font.size": 9}
_META = {"Date": None, "Creator": "flexarm"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def plot_panels(trace, path, title: str = "") -> None:
    """Four stacked panels: tracking, error, deflections, control torque."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(4, 1, figsize=(7, 9), sharex=True)
        t = trace.t
        qr, qd = trace.group("q_r"), trace.group("q_d")
        for j in range(qr.shape[1]):
            ax[0].plot(t, qr[:, j], "--", lw=1.0, label="q_r" if qr.shape[1] == 1 else f"q_r{j + 1}")
            ax[0].plot(t, qd[:, j], "-", lw=0.8, label="q_d" if qd.shape[1] == 1 else f"q_d{j + 1}")
        ax[0].set_ylabel("angle (rad)")
        ax[0].legend(loc="upper right", fontsize=7)

        ax[1].plot(t, trace.group("e"), lw=0.8)
        ax[1].set_ylabel("error (rad)")

        qf = trace.q_f
        for i in range(qf.shape[1]):
            ax[2].plot(t, qf[:, i], lw=0.8, label=f"q_f{i + 1}")
        if qf.shape[1]:
            ax[2].legend(loc="upper right", fontsize=7)
        ax[2].set_ylabel("deflection (modal)")

        ax[3].plot(t, trace.group("tau"), lw=0.8)
        ax[3].set_ylabel("torque (N m)")
        ax[3].set_xlabel("time (s)")
        for a in ax:
            a.grid(True, lw=0.3)
        if title:
            ax[0].set_title(title)
        fig.tight_layout()
        _save(fig, path)


def plot_deflection_comparison(traces: dict, path) -> None:
    """First-mode deflection of several runs on shared axes."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(len(traces), 1, figsize=(7, 2.4 * len(traces)), sharex=True, sharey=True,
                               squeeze=False)
        for a, (name, tr) in zip(ax[:, 0], traces.items()):
            qf = tr.q_f
            for i in range(qf.shape[1]):
                a.plot(tr.t, qf[:, i], lw=0.8, label=f"q_f{i + 1}")
            a.set_title(name)
            a.set_ylabel("deflection (modal)")
            a.grid(True, lw=0.3)
            a.legend(loc="upper right", fontsize=7)
        ax[-1, 0].set_xlabel("time (s)")
        fig.tight_layout()
        _save(fig, path)


def plot_sweep(rows, slope: float, path) -> None:
    """Log-log gap versus eps with the fitted slope."""
    import numpy as np

    eps = np.array([r[1] for r in rows])
    gap = np.array([r[2] for r in rows])
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(eps, gap, "o-", label=f"slope {slope:.3f}")
        ax.set_xlabel("eps")
        ax.set_ylabel("sup |q_r - q_r_bar| (rad)")
        ax.grid(True, which="both", lw=0.3)
        ax.legend()
        fig.tight_layout()
        _save(fig, path)
