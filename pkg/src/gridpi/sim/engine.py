"""An engine instance: definitions plus its own fresh-name supply."""

from __future__ import annotations

from dataclasses import dataclass

from ..grid.encode import Encoding, encode_grid
from ..grid.snapshot import Snapshot, extract_snapshot
from ..grid.static import GridConfig
from ..hopi.congruence import digest, normalize
from ..hopi.reduction import (
    Comm, collect_garbage, enumerate_redexes, prenex, reduce_step, unfold_all,
)
from ..hopi.syntax import pretty_value
from ..hopi.terms import FreshSupply, Sum


@dataclass(frozen=True)
class StepInfo:
    kind: str
    channel: str | None
    values: tuple[str, ...]


class Engine:
    """Reduction driver over one encoding.

    ``eager`` engines perform unfoldings and conditionals as part of every
    step, so only communications are visible; this is the mode used for
    exhaustive exploration. Non-eager engines expose unfold redexes too.
    """

    def __init__(self, encoding: Encoding, eager: bool = False):
        self.enc = encoding
        self.env = encoding.env
        self.eager = eager
        self.fresh = FreshSupply()

    @classmethod
    def for_config(cls, cfg: GridConfig, eager=False, strict=True):
        return cls(encode_grid(cfg, strict=strict), eager)

    def _tidy(self, p):
        if self.eager:
            p = unfold_all(p, self.env, self.fresh)
        return collect_garbage(p)

    def initial(self):
        """The main process with its start-up unfoldings already performed."""
        p = unfold_all(normalize(self.enc.main, self.env), self.env, self.fresh)
        return collect_garbage(p)

    def redexes(self, p) -> list:
        rs = enumerate_redexes(p, self.env)
        if self.eager:
            rs = [r for r in rs if isinstance(r, Comm)]
        return rs

    def step(self, p, r):
        return self._tidy(reduce_step(p, r, self.env, self.fresh))

    def describe(self, p, r, limit: int = 60) -> StepInfo:
        if isinstance(r, Comm):
            _, leaves = prenex(p)
            pre = leaves[r.out].branches[r.out_branch][0]
            vals = tuple(_trunc(pretty_value(v), limit) for v in pre.args)
            return StepInfo("comm", r.channel.display, vals)
        return StepInfo(r.kind, getattr(r, "defn", None), ())

    def snapshot(self, p) -> Snapshot:
        return extract_snapshot(p, self.enc.params)

    @staticmethod
    def digest(p) -> str:
        return digest(p)


def _trunc(s: str, n: int) -> str:
    return s if len(s) <= n else s[: n - 3] + "..."


def all_delivered(snap: Snapshot, users) -> bool:
    return set(snap.delivered) >= set(users)


def is_inert(p) -> bool:
    _, leaves = prenex(p)
    return all(isinstance(t, Sum) for t in leaves)
