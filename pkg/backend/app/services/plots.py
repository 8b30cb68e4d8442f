"""
점검용 SVG 그림 (--plot)
========================
그림은 눈으로 보는 보조 자료일 뿐 어떤 계산의 입력도 아니다.
"""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_traces(path, angles, traces: dict) -> Path:
    """traces: 이름 → 경계 각도별 값"""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for name, values in traces.items():
        ax.plot(angles, values, label=name)
    ax.set_xlabel("angle")
    ax.set_ylabel("trace")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_singular_values(path, singular_values) -> Path:
    sv = np.asarray(singular_values, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(np.arange(1, len(sv) + 1), np.maximum(sv, 1e-300), "o-")
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    fig.tight_layout()
    return _save(fig, path)


def plot_potential(path, nodes, values, title: str = "q") -> Path:
    nodes = np.asarray(nodes, dtype=float)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    art = ax.tricontourf(nodes[:, 0], nodes[:, 1], np.asarray(values, dtype=float), levels=24)
    fig.colorbar(art, ax=ax)
    ax.set_aspect("equal")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
