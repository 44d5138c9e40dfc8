"""Figures rendered next to the delimited report outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def render_training_curves(history, path):
    """Plot per-epoch mean loss and dev tau from (epoch, loss, tau) rows."""
    epochs = [row[0] for row in history]
    losses = [row[1] for row in history]
    taus = [row[2] for row in history]
    fig, ax_loss = plt.subplots(figsize=(7.0, 4.0))
    ax_loss.plot(epochs, losses, color="tab:blue", label="mean training loss")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("mean training loss", color="tab:blue")
    ax_loss.tick_params(axis="y", labelcolor="tab:blue")
    ax_tau = ax_loss.twinx()
    ax_tau.plot(epochs, taus, color="tab:orange", label="dev tau")
    ax_tau.set_ylabel("dev tau", color="tab:orange")
    ax_tau.tick_params(axis="y", labelcolor="tab:orange")
    ax_loss.set_title("training trajectory")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_tau_bars(per_language, macro, path, subtitle=""):
    """Bar chart of per-language correlation values plus the macro average."""
    languages = list(per_language)
    values = [per_language[lang] for lang in languages]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(languages) + 2.0), 4.0))
    ax.bar(languages, values, color="tab:blue")
    ax.axhline(macro, color="tab:orange", linestyle="--",
               label=f"macro average {macro:.4f}")
    ax.set_ylabel("tau")
    title = "segment-level correlation"
    if subtitle:
        title = f"{title} ({subtitle})"
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
