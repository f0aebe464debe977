"""Inceptive event filtering: label events inceptive / trailing / noisy.

A burst of events at one pixel is one edge encounter: the first event of
the burst (the inceptive event, IE) carries the edge arrival time, the
same-polarity followers (trailing events, TE) encode edge magnitude by
their count, and isolated events are noisy (NE).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .events import CLS_INCEPTIVE, LabeledStream, sort_check


@dataclass(frozen=True)
class FilterConfig:
    """Classification gap threshold and chain topology.

    With ``per_polarity`` true (default) each pixel keeps one gap chain per
    polarity, so a polarity flip starts a new burst; false reproduces a
    strict single-chain-per-pixel reading.
    """
    delta_us: int = 5000
    per_polarity: bool = True

    def __post_init__(self):
        if self.delta_us <= 0:
            raise ValueError("delta_us must be positive")


@dataclass(frozen=True)
class IeGraphNode:
    """An inceptive event and its trailing-event count (edge magnitude)."""
    ie_index: int
    magnitude: int


def classify(stream: LabeledStream, cfg: FilterConfig) -> tuple[LabeledStream, list[IeGraphNode]]:
    """Label every event and attach trailing events to their inceptive owner.

    Input must be time-ordered. Event order and count are unchanged;
    re-running with the same delta is idempotent.
    """
    if not sort_check(stream):
        raise ValueError("classify requires a time-ordered stream")
    cls, ie_ref, magnitude = kernels.classify_events(
        stream.t, stream.x, stream.y, stream.p,
        stream.geometry.width_px, stream.geometry.height_px,
        int(cfg.delta_us), bool(cfg.per_polarity),
    )
    out = stream.replace(cls=cls, ie_ref=ie_ref)
    ie_idx = np.nonzero(cls == CLS_INCEPTIVE)[0]
    nodes = [IeGraphNode(int(i), int(magnitude[i])) for i in ie_idx]
    return out, nodes
