"""Deterministic benchmark document generators with oracle sidecars.

Every generator returns a ``Generated`` bundle: the XML text, the edge list
of the graph the recursion walks (``from``/``to`` are ID attribute values),
and a dict of expected answers.  The sidecar text format is one
``from<TAB>to`` edge per line, preceded by ``#key<TAB>value`` answer lines.
"""

from __future__ import annotations

import os
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

FAMILIES = ("curriculum", "auction", "dialog", "ancestry")
DEFAULT_SEED = 20070415


def default_seed() -> int:
    """Seed taken from FIXQ_SEED when set."""
    raw = os.environ.get("FIXQ_SEED")
    return int(raw) if raw else DEFAULT_SEED


@dataclass
class GenSpec:
    family: str = "curriculum"
    size: int = 100  # courses, persons, speeches or top-level patients
    fanout: int = 2
    topology: str = "random"  # curriculum: chain | random | cycle
    window: int = 0  # curriculum random: prerequisites drawn from the next `window` courses
    cycle_prob: float = 0.0
    depth: int = 5  # ancestry nesting depth, dialog planted run length
    rng_seed: int = field(default_factory=default_seed)
    id_attr: str = "code"  # curriculum ID attribute

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.size < 1 or self.fanout < 1 or self.depth < 1:
            raise ValueError("size parameters must be positive")


@dataclass
class Generated:
    xml: str
    edges: list  # (from, to) pairs
    answers: dict

    def sidecar(self) -> str:
        lines = [f"#{k}\t{v}" for k, v in sorted(self.answers.items())]
        lines += [f"{a}\t{b}" for a, b in self.edges]
        return "\n".join(lines) + "\n"


# Named generator settings used by the benchmarks and tests.
PRESETS = {
    "chain36": GenSpec("curriculum", 36, topology="chain"),
    "medium": GenSpec("curriculum", 800, fanout=2, window=65),
    "large": GenSpec("curriculum", 4000, fanout=2, window=168),
    "cycle": GenSpec("curriculum", 2, topology="cycle"),
    "auction-small": GenSpec("auction", 200, fanout=3),
    "dialog": GenSpec("dialog", 400, depth=7),
    "ancestry": GenSpec("ancestry", 100, depth=5),
}


def preset(name: str, **overrides) -> GenSpec:
    base = PRESETS[name]
    return GenSpec(**{**base.__dict__, **overrides})


def parse_sidecar(text: str) -> tuple[list, dict]:
    edges, answers = [], {}
    for line in text.splitlines():
        if not line.strip():
            continue
        a, b = line.split("\t", 1)
        if a.startswith("#"):
            answers[a[1:]] = b
        else:
            edges.append((a, b))
    return edges, answers


def reachable(edges, start) -> set:
    """Forward closure of ``start`` along ``edges``; ``start`` is included only if on a cycle."""
    adj: dict = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
    seen: set = set()
    todo = deque(adj.get(start, ()))
    while todo:
        v = todo.popleft()
        if v in seen:
            continue
        seen.add(v)
        todo.extend(adj.get(v, ()))
    return seen


def bfs_depth(edges, starts) -> int:
    """Largest shortest-path distance from ``starts`` to any reachable node."""
    adj: dict = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
    dist = {s: 0 for s in starts}
    todo = deque(starts)
    while todo:
        v = todo.popleft()
        for w in adj.get(v, ()):
            if w not in dist:
                dist[w] = dist[v] + 1
                todo.append(w)
    return max(dist.values(), default=0)


# -- curriculum ----------------------------------------------------------------


def gen_curriculum(spec: GenSpec) -> Generated:
    n = spec.size
    rng = random.Random(spec.rng_seed)
    codes = [f"c{i}" for i in range(1, n + 1)]
    prereqs: list = [[] for _ in range(n)]
    if spec.topology == "chain":
        for i in range(n - 1):
            prereqs[i].append(i + 1)
    elif spec.topology == "cycle":
        for i in range(n):
            prereqs[i].append((i + 1) % n)
    elif spec.topology == "random":
        window = spec.window or max(2, n // 10)
        for i in range(n - 1):
            hi = min(n - 1, i + window)
            k = min(spec.fanout, hi - i)
            prereqs[i] = sorted(rng.sample(range(i + 1, hi + 1), k))
            if spec.cycle_prob and i > 0 and rng.random() < spec.cycle_prob:
                prereqs[i].append(rng.randrange(0, i))
    else:
        raise ValueError(f"unknown topology {spec.topology!r}")

    out = ["<curriculum>"]
    edges = []
    for i, code in enumerate(codes):
        out.append(f'<course {spec.id_attr}="{code}"><prerequisites>')
        for j in prereqs[i]:
            out.append(f"<pre_code>{codes[j]}</pre_code>")
            edges.append((code, codes[j]))
        out.append("</prerequisites></course>")
    out.append("</curriculum>")
    closure = reachable(edges, codes[0])
    answers = {
        "seed": codes[0],
        "closure_size": len(closure),
        "depth": bfs_depth(edges, [codes[0]]),
        "self_prerequisites": " ".join(c for c in codes if c in reachable(edges, c))
        if n <= 200 else "",
    }
    return Generated("\n".join(out) + "\n", edges, answers)


# -- auction (bidder network) --------------------------------------------------


def gen_auction(spec: GenSpec) -> Generated:
    """People plus open auctions; a seller links to each bidder of their auctions."""
    n = spec.size
    rng = random.Random(spec.rng_seed)
    people = [f"person{i}" for i in range(n)]
    auctions = []
    for i in range(max(1, n // 2)):
        seller = rng.randrange(n)
        k = rng.randint(1, spec.fanout)
        bidders = [rng.randrange(n) for _ in range(k)]
        auctions.append((seller, bidders))
    out = ["<site>", "<people>"]
    for p in people:
        out.append(f'<person id="{p}"><name>{p}</name></person>')
    out.append("</people>")
    out.append("<open_auctions>")
    edges = set()
    for i, (seller, bidders) in enumerate(auctions):
        out.append(f'<open_auction id="auction{i}">')
        for b in bidders:
            out.append(f'<bidder><personref person="{people[b]}"/></bidder>')
            edges.add((people[seller], people[b]))
        out.append(f'<seller person="{people[seller]}"/>')
        out.append("</open_auction>")
    out.append("</open_auctions>")
    out.append("</site>")
    edges = sorted(edges)
    sizes = [len(reachable(edges, p)) for p in people]
    best = max(range(n), key=lambda i: (sizes[i], -i))
    answers = {"network_total": sum(sizes), "seed": people[best],
               "closure_size": sizes[best], "depth": bfs_depth(edges, [people[best]])}
    return Generated("\n".join(out) + "\n", edges, answers)


# -- dialog --------------------------------------------------------------------


def gen_dialog(spec: GenSpec) -> Generated:
    """SPEECH siblings whose alternating-speaker runs have planted lengths.

    A run is a maximal sequence of adjacent speeches in which each speaker
    differs from the previous one; runs are separated by a repeated speaker.
    One run of exactly ``depth`` speeches is planted; all others are shorter.
    """
    rng = random.Random(spec.rng_seed)
    longest = spec.depth
    speakers = ["ROMEO", "JULIET", "NURSE", "MERCUTIO", "TYBALT", "BENVOLIO"]
    runs = [longest]
    total = longest
    while total < spec.size:
        length = rng.randint(1, max(1, longest - 1))
        runs.append(length)
        total += length
    rng.shuffle(runs)

    seq: list = []
    for length in runs:
        # the first speaker repeats the previous speech's speaker to break the run
        prev = seq[-1] if seq else None
        first = prev if prev is not None else rng.choice(speakers)
        run = [first]
        while len(run) < length:
            run.append(rng.choice([s for s in speakers if s != run[-1]]))
        seq.extend(run)

    out = ["<PLAY>", "<TITLE>Generated dialogs</TITLE>", "<SCENE>"]
    edges = []
    for i, who in enumerate(seq):
        out.append(f'<SPEECH id="s{i}"><SPEAKER>{who}</SPEAKER>'
                   f"<LINE>line {i}</LINE></SPEECH>")
        if i > 0 and seq[i - 1] != who:
            edges.append((f"s{i - 1}", f"s{i}"))
    out.append("</SCENE>")
    out.append("</PLAY>")
    starts = [f"s{i}" for i in range(len(seq)) if i == 0 or seq[i - 1] == seq[i]]
    answers = {"longest_run": longest, "runs": len(starts),
               "speeches": len(seq), "depth": bfs_depth(edges, starts)}
    return Generated("\n".join(out) + "\n", edges, answers)


# -- ancestry (hospital records) -----------------------------------------------


def gen_ancestry(spec: GenSpec) -> Generated:
    """Patients with nested parent records, at most ``depth`` generations deep.

    The first patient carries a planted line reaching the full depth.
    """
    rng = random.Random(spec.rng_seed)
    counter = [0]
    edges: list = []
    diseases = ("none", "none", "none", "hereditary")

    def patient(level: int, planted: bool, parent_id: Optional[str]) -> list:
        counter[0] += 1
        pid = f"p{counter[0]}"
        if parent_id is not None:
            edges.append((parent_id, pid))
        lines = [f'<patient id="{pid}"><name>{pid}</name>'
                 f"<diagnosis>{rng.choice(diseases)}</diagnosis>"]
        if level < spec.depth:
            k = rng.randint(0, 2)
            if planted:
                k = max(k, 1)
            for j in range(k):
                lines.append("<parent>")
                lines.extend(patient(level + 1, planted and j == 0, pid))
                lines.append("</parent>")
        lines.append("</patient>")
        return lines

    out = ["<hospital>"]
    tops = []
    for i in range(spec.size):
        tops.append(f"p{counter[0] + 1}")
        out.extend(patient(0, i == 0, None))
    out.append("</hospital>")
    answers = {"depth": bfs_depth(edges, tops), "patients": counter[0],
               "ancestors": counter[0] - spec.size}
    return Generated("\n".join(out) + "\n", edges, answers)


GENERATORS = {
    "curriculum": gen_curriculum,
    "auction": gen_auction,
    "dialog": gen_dialog,
    "ancestry": gen_ancestry,
}


def generate(spec: GenSpec) -> Generated:
    return GENERATORS[spec.family](spec)
