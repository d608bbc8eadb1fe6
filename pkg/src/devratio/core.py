"""Domain model: graphs, latency functions, commodities, thresholds, flows.

All types are immutable after construction and safe to share between
threads. Node and arc ids are opaque strings; anywhere an order matters we
sort by id so that runs are reproducible.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import InvalidInstance, PathExplosion

#: Arc flows below this value are treated as zero (support cutoff).
SUPPORT_EPS = 1e-10

#: Samples per unit interval used by grid-based feasibility checks.
GRID_DENSITY = 64


# ---------------------------------------------------------------------------
# Scalar functions
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Curve:
    """Evaluable scalar function of one non-negative variable.

    Two variants:

    * ``poly``: polynomial with coefficients ``data[k]`` for x**k.
    * ``pwl``: continuous piecewise-linear through sorted breakpoints
      ``[(x0, y0), (x1, y1), ...]``; constant before the first breakpoint
      and extrapolated with the last segment's slope after the last one.

    A Curve used as a latency function must be non-negative and
    non-decreasing (see :func:`validate_latency`); deviations may take
    negative values.
    """

    kind: str  # "poly" | "pwl"
    data: tuple

    @classmethod
    def poly(cls, coefficients: Sequence[float]) -> "Curve":
        coeffs = tuple(float(c) for c in coefficients) or (0.0,)
        return cls("poly", coeffs)

    @classmethod
    def constant(cls, value: float) -> "Curve":
        return cls.poly([value])

    @classmethod
    def pwl(cls, breakpoints: Sequence[tuple[float, float]]) -> "Curve":
        pts = tuple((float(x), float(y)) for x, y in breakpoints)
        if not pts:
            raise ValueError("pwl curve needs at least one breakpoint")
        for (x0, _), (x1, _) in zip(pts, pts[1:]):
            if x1 <= x0:
                raise ValueError("pwl breakpoints must be strictly increasing in x")
        return cls("pwl", pts)

    @classmethod
    def ramp(cls, x0: float, x1: float, y1: float) -> "Curve":
        """Zero up to x0, then linear reaching y1 at x1 (slope continues)."""
        return cls.pwl([(x0, 0.0), (x1, y1)])

    def eval(self, x: float) -> float:
        if self.kind == "poly":
            acc = 0.0
            for c in reversed(self.data):
                acc = acc * x + c
            return acc
        pts = self.data
        if x <= pts[0][0]:
            return pts[0][1]
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if x <= x1:
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        if len(pts) == 1:
            return pts[0][1]
        (x0, y0), (x1, y1) = pts[-2], pts[-1]
        return y1 + (y1 - y0) * (x - x1) / (x1 - x0)

    def integral(self, upper: float) -> float:
        """Exact value of the integral from 0 to ``upper``."""
        if upper <= 0.0:
            return 0.0
        if self.kind == "poly":
            acc = 0.0
            for k, c in enumerate(self.data):
                acc += c * upper ** (k + 1) / (k + 1)
            return acc
        total = 0.0
        prev_x = 0.0
        prev_y = self.eval(0.0)
        for x, y in self.data:
            if x <= 0.0:
                prev_x, prev_y = max(x, 0.0), y if x >= 0.0 else self.eval(0.0)
                continue
            seg_end = min(x, upper)
            if seg_end > prev_x:
                y_end = self.eval(seg_end)
                total += 0.5 * (prev_y + y_end) * (seg_end - prev_x)
                prev_x, prev_y = seg_end, y_end
            if x >= upper:
                return total
        if upper > prev_x:
            y_end = self.eval(upper)
            total += 0.5 * (prev_y + y_end) * (upper - prev_x)
        return total

    def scale(self, factor: float) -> "Curve":
        if self.kind == "poly":
            return Curve.poly([factor * c for c in self.data])
        return Curve("pwl", tuple((x, factor * y) for x, y in self.data))

    def breakpoint_xs(self) -> tuple[float, ...]:
        if self.kind == "pwl":
            return tuple(x for x, _ in self.data)
        return ()

    def to_json(self) -> dict:
        if self.kind == "poly":
            return {"poly": list(self.data)}
        return {"pwl": [[x, y] for x, y in self.data]}

    @classmethod
    def from_json(cls, spec: Mapping) -> "Curve":
        if "poly" in spec:
            return cls.poly(spec["poly"])
        if "pwl" in spec:
            return cls.pwl([tuple(p) for p in spec["pwl"]])
        raise ValueError(f"unknown curve spec: {spec!r}")


ZERO_CURVE = Curve.poly([0.0])


def validate_latency(curve: Curve, name: str = "latency") -> None:
    """Reject curves that are not non-negative and non-decreasing."""
    if curve.kind == "poly":
        if any(c < 0.0 for c in curve.data):
            raise InvalidInstance(f"{name}: polynomial coefficients must be >= 0")
        return
    ys = [y for _, y in curve.data]
    if ys[0] < 0.0:
        raise InvalidInstance(f"{name}: negative value at first breakpoint")
    for y0, y1 in zip(ys, ys[1:]):
        if y1 < y0:
            raise InvalidInstance(f"{name}: breakpoints must be non-decreasing")


def sample_grid(x_max: float, extra: Iterable[float] = ()) -> list[float]:
    """Evaluation grid: GRID_DENSITY points per unit on [0, x_max] plus extras."""
    x_max = max(x_max, 1.0)
    n = int(x_max * GRID_DENSITY) + 1
    pts = {i * x_max / (n - 1) for i in range(n)}
    pts.update(x for x in extra if 0.0 <= x <= x_max)
    return sorted(pts)


# ---------------------------------------------------------------------------
# Instance building blocks
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Arc:
    id: str
    tail: str
    head: str
    latency: Curve


@dataclass(frozen=True)
class Commodity:
    source: str
    sink: str
    demand: float

    def __post_init__(self):
        if self.demand <= 0.0:
            raise InvalidInstance("commodity demand must be positive")
        if self.source == self.sink:
            raise InvalidInstance("commodity source and sink must differ")


@dataclass(frozen=True)
class ThresholdPair:
    """Per-arc deviation bounds theta_min <= 0 <= theta_max.

    Two kinds:

    * ``alpha_beta``: theta_min = alpha * l_a, theta_max = beta * l_a with
      -1 < alpha <= 0 <= beta.
    * ``per_arc``: explicit curves per arc id. ``lower`` stores the
      *magnitude* of theta_min (a non-negative curve, negated on
      evaluation); missing arcs default to zero.
    """

    kind: str
    alpha: float = 0.0
    beta: float = 0.0
    lower: Mapping[str, Curve] = field(default_factory=dict)
    upper: Mapping[str, Curve] = field(default_factory=dict)

    @classmethod
    def alpha_beta(cls, alpha: float, beta: float) -> "ThresholdPair":
        if not (-1.0 < alpha <= 0.0 <= beta):
            raise InvalidInstance("need -1 < alpha <= 0 <= beta")
        return cls("alpha_beta", alpha=alpha, beta=beta)

    @classmethod
    def per_arc(cls, lower: Mapping[str, Curve] | None = None,
                upper: Mapping[str, Curve] | None = None) -> "ThresholdPair":
        lower = dict(lower or {})
        upper = dict(upper or {})
        for name, curves in (("theta_min magnitude", lower), ("theta_max", upper)):
            for arc_id, curve in curves.items():
                validate_latency(curve, f"{name}[{arc_id}]")
        return cls("per_arc", lower=lower, upper=upper)

    @classmethod
    def zero(cls) -> "ThresholdPair":
        return cls.per_arc()

    def theta_min(self, arc: Arc, x: float) -> float:
        if self.kind == "alpha_beta":
            return self.alpha * arc.latency.eval(x)
        curve = self.lower.get(arc.id)
        return -curve.eval(x) if curve is not None else 0.0

    def theta_max(self, arc: Arc, x: float) -> float:
        if self.kind == "alpha_beta":
            return self.beta * arc.latency.eval(x)
        curve = self.upper.get(arc.id)
        return curve.eval(x) if curve is not None else 0.0

    def theta_min_curve(self, arc: Arc) -> Curve:
        """Signed curve for theta_min (values <= 0)."""
        if self.kind == "alpha_beta":
            return arc.latency.scale(self.alpha)
        curve = self.lower.get(arc.id)
        return curve.scale(-1.0) if curve is not None else ZERO_CURVE

    def theta_max_curve(self, arc: Arc) -> Curve:
        if self.kind == "alpha_beta":
            return arc.latency.scale(self.beta)
        return self.upper.get(arc.id, ZERO_CURVE)

    def to_json(self) -> dict:
        if self.kind == "alpha_beta":
            return {"kind": "alpha_beta", "alpha": self.alpha, "beta": self.beta}
        return {
            "kind": "per_arc",
            "theta_min": {a: c.to_json() for a, c in self.lower.items()},
            "theta_max": {a: c.to_json() for a, c in self.upper.items()},
        }

    @classmethod
    def from_json(cls, spec: Mapping) -> "ThresholdPair":
        if spec["kind"] == "alpha_beta":
            return cls.alpha_beta(spec["alpha"], spec["beta"])
        return cls.per_arc(
            {a: Curve.from_json(c) for a, c in spec.get("theta_min", {}).items()},
            {a: Curve.from_json(c) for a, c in spec.get("theta_max", {}).items()},
        )


class Instance:
    """A non-atomic routing game with per-arc deviation thresholds."""

    def __init__(self, nodes: Sequence[str], arcs: Sequence[Arc],
                 commodities: Sequence[Commodity],
                 thresholds: ThresholdPair | None = None):
        self.nodes = tuple(sorted(nodes))
        self.arcs = tuple(sorted(arcs, key=lambda a: a.id))
        self.commodities = tuple(commodities)
        self.thresholds = thresholds if thresholds is not None else ThresholdPair.zero()
        self._validate()
        self.arcs_by_id = {a.id: a for a in self.arcs}
        self.out_arcs: dict[str, list[Arc]] = {v: [] for v in self.nodes}
        for arc in self.arcs:
            self.out_arcs[arc.tail].append(arc)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def total_demand(self) -> float:
        return sum(c.demand for c in self.commodities)

    @property
    def common_source(self) -> bool:
        sources = {c.source for c in self.commodities}
        return len(sources) == 1

    @property
    def source(self) -> str:
        if not self.common_source:
            from .errors import NotCommonSource
            raise NotCommonSource("instance has multiple sources")
        return self.commodities[0].source

    def _validate(self) -> None:
        node_set = set(self.nodes)
        seen_ids: set[str] = set()
        for arc in self.arcs:
            if arc.id in seen_ids:
                raise InvalidInstance(f"duplicate arc id {arc.id!r}")
            seen_ids.add(arc.id)
            if arc.tail not in node_set or arc.head not in node_set:
                raise InvalidInstance(f"arc {arc.id!r} references unknown node")
            validate_latency(arc.latency, f"latency[{arc.id}]")
        if not self.commodities:
            raise InvalidInstance("instance needs at least one commodity")
        sinks = [c.sink for c in self.commodities]
        if len(set(sinks)) != len(sinks):
            raise InvalidInstance("commodity sinks must be pairwise distinct")
        for c in self.commodities:
            if c.source not in node_set or c.sink not in node_set:
                raise InvalidInstance("commodity endpoint not a node")

    def check_threshold_assumption(self) -> None:
        """Assert l_a + theta_min_a >= 0 on a sample grid (Assumption on
        thresholds that keeps perceived latencies non-negative)."""
        for arc in self.arcs:
            extra = arc.latency.breakpoint_xs() + \
                self.thresholds.theta_min_curve(arc).breakpoint_xs()
            for x in sample_grid(self.total_demand, extra):
                if arc.latency.eval(x) + self.thresholds.theta_min(arc, x) < -1e-12:
                    raise InvalidInstance(
                        f"l + theta_min negative on arc {arc.id!r} at x={x}")

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "arcs": [
                {"id": a.id, "tail": a.tail, "head": a.head,
                 "latency": a.latency.to_json()}
                for a in self.arcs
            ],
            "commodities": [
                {"source": c.source, "sink": c.sink, "demand": c.demand}
                for c in self.commodities
            ],
            "thresholds": self.thresholds.to_json(),
        }

    @classmethod
    def from_json(cls, spec: Mapping) -> "Instance":
        arcs = [Arc(a["id"], a["tail"], a["head"], Curve.from_json(a["latency"]))
                for a in spec["arcs"]]
        commodities = [Commodity(c["source"], c["sink"], float(c["demand"]))
                       for c in spec["commodities"]]
        thresholds = ThresholdPair.from_json(spec["thresholds"]) \
            if "thresholds" in spec else ThresholdPair.zero()
        return cls(spec["nodes"], arcs, commodities, thresholds)

    def to_dot(self) -> str:
        lines = ["digraph instance {"]
        for node in self.nodes:
            lines.append(f'  "{node}";')
        for arc in self.arcs:
            label = json.dumps(arc.latency.to_json())
            label = label.replace('"', r"\"")
            lines.append(f'  "{arc.tail}" -> "{arc.head}" '
                         f'[label="{arc.id}: {label}"];')
        lines.append("}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Deviations
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Deviation:
    """Per-arc additive latency perturbations; zero where unspecified."""

    curves: Mapping[str, Curve] = field(default_factory=dict)

    @classmethod
    def zero(cls) -> "Deviation":
        return cls({})

    @classmethod
    def constants(cls, values: Mapping[str, float]) -> "Deviation":
        return cls({a: Curve.constant(v) for a, v in values.items() if v != 0.0})

    def eval(self, arc_id: str, x: float) -> float:
        curve = self.curves.get(arc_id)
        return curve.eval(x) if curve is not None else 0.0

    def integral(self, arc_id: str, upper: float) -> float:
        curve = self.curves.get(arc_id)
        return curve.integral(upper) if curve is not None else 0.0

    def to_json(self) -> dict:
        return {"arcs": {a: c.to_json() for a, c in self.curves.items()}}

    @classmethod
    def from_json(cls, spec: Mapping) -> "Deviation":
        return cls({a: Curve.from_json(c) for a, c in spec.get("arcs", {}).items()})


Path = tuple[str, ...]  # sequence of arc ids


# ---------------------------------------------------------------------------
# Flows
# ---------------------------------------------------------------------------
class Flow:
    """Path-indexed flow per commodity with a cached arc-flow view."""

    def __init__(self, instance: Instance,
                 commodity_paths: Sequence[Mapping[Path, float]],
                 check: bool = True):
        if len(commodity_paths) != len(instance.commodities):
            raise InvalidInstance("one path map per commodity required")
        self.instance = instance
        self.commodity_paths: tuple[dict[Path, float], ...] = tuple(
            {tuple(p): float(v) for p, v in paths.items() if v != 0.0}
            for paths in commodity_paths
        )
        if check:
            self._check_feasibility()
        self.arc_flows: dict[str, float] = {a.id: 0.0 for a in instance.arcs}
        self.commodity_arc_flows: list[dict[str, float]] = []
        for paths in self.commodity_paths:
            per_arc = {a.id: 0.0 for a in instance.arcs}
            for path, value in paths.items():
                for arc_id in path:
                    per_arc[arc_id] += value
                    self.arc_flows[arc_id] += value
            self.commodity_arc_flows.append(per_arc)

    def _check_feasibility(self) -> None:
        for commodity, paths in zip(self.instance.commodities, self.commodity_paths):
            total = 0.0
            for path, value in paths.items():
                if value < -1e-12:
                    raise InvalidInstance("negative path flow")
                node = commodity.source
                for arc_id in path:
                    arc = self.instance.arcs_by_id.get(arc_id)
                    if arc is None or arc.tail != node:
                        raise InvalidInstance(f"path {path} is not connected")
                    node = arc.head
                if node != commodity.sink:
                    raise InvalidInstance(f"path {path} does not reach the sink")
                total += value
            if abs(total - commodity.demand) > 1e-9:
                raise InvalidInstance(
                    f"path flows sum to {total}, demand is {commodity.demand}")

    def arc_flow(self, arc_id: str) -> float:
        return self.arc_flows[arc_id]

    def support(self) -> set[str]:
        return {a for a, v in self.arc_flows.items() if v > SUPPORT_EPS}

    def commodity_support(self, i: int) -> set[str]:
        return {a for a, v in self.commodity_arc_flows[i].items() if v > SUPPORT_EPS}

    def to_json(self) -> dict:
        return {
            "commodities": [
                {
                    "source": c.source, "sink": c.sink, "demand": c.demand,
                    "paths": [{"arcs": list(p), "value": v}
                              for p, v in sorted(paths.items())],
                }
                for c, paths in zip(self.instance.commodities, self.commodity_paths)
            ]
        }

    @classmethod
    def from_json(cls, instance: Instance, spec: Mapping) -> "Flow":
        maps = []
        for entry in spec["commodities"]:
            maps.append({tuple(p["arcs"]): p["value"] for p in entry["paths"]})
        return cls(instance, maps)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------
def enumerate_paths(instance: Instance, commodity: Commodity,
                    cap: int = 10000) -> list[Path]:
    """All simple source->sink paths, lexicographic by arc-id sequence.

    Raises PathExplosion as soon as more than ``cap`` paths are found.
    """
    result: list[Path] = []
    visited = {commodity.source}
    stack: list[str] = []

    def dfs(node: str) -> None:
        if node == commodity.sink:
            result.append(tuple(stack))
            if len(result) > cap:
                raise PathExplosion(len(result), cap)
            return
        for arc in sorted(instance.out_arcs[node], key=lambda a: a.id):
            if arc.head in visited:
                continue
            visited.add(arc.head)
            stack.append(arc.id)
            dfs(arc.head)
            stack.pop()
            visited.remove(arc.head)

    dfs(commodity.source)
    return result


def social_cost(instance: Instance, flow: Flow) -> float:
    """Total average latency sum_a f_a * l_a(f_a); deviations excluded."""
    return sum(v * instance.arcs_by_id[a].latency.eval(v)
               for a, v in flow.arc_flows.items())


def path_latency(instance: Instance, flow: Flow, path: Sequence[str],
                 deviation: Deviation | None = None) -> float:
    total = 0.0
    for arc_id in path:
        arc = instance.arcs_by_id[arc_id]
        x = flow.arc_flow(arc_id)
        total += arc.latency.eval(x)
        if deviation is not None:
            total += deviation.eval(arc_id, x)
    return total


def validate_deviation(instance: Instance, deviation: Deviation) -> list[dict]:
    """Grid check of theta_min <= delta <= theta_max; empty report == feasible.

    The grid includes all breakpoints of the latency, threshold and
    deviation curves, which makes the check exact for the piecewise-linear
    and polynomial families used here.
    """
    report = []
    for arc in instance.arcs:
        extra = (arc.latency.breakpoint_xs()
                 + instance.thresholds.theta_min_curve(arc).breakpoint_xs()
                 + instance.thresholds.theta_max_curve(arc).breakpoint_xs())
        curve = deviation.curves.get(arc.id)
        if curve is not None:
            extra = extra + curve.breakpoint_xs()
        for x in sample_grid(instance.total_demand, extra):
            value = deviation.eval(arc.id, x)
            lo = instance.thresholds.theta_min(arc, x)
            hi = instance.thresholds.theta_max(arc, x)
            if value < lo - 1e-9 or value > hi + 1e-9:
                report.append({"arc": arc.id, "x": x, "delta": value,
                               "theta_min": lo, "theta_max": hi})
    return report
