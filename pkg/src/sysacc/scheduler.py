"""Layer scheduling: stages x partitions under local-memory and accumulator capacity.

Activations live in a channel-group-major vector layout: a tensor of shape
``h x w x c`` occupies ``ceil(c / cols) * h * w`` vectors and vector
``g * h * w + y * w + x`` holds channels ``[g * cols, (g + 1) * cols)`` of
pixel ``(y, x)``.  Weights of a matmul layer are stored per output-channel
group as ``k`` weight tiles of ``array_rows`` vectors followed by one bias
vector.

A stage keeps one unique slice of weights (whole output-channel groups)
resident; partitions cut a stage along output rows.  Input rows are streamed
into a sliding window: the rows shared by consecutive partitions (the halo)
are moved inside local memory instead of being reloaded, so every input row
is fetched exactly once per stage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from sysacc.archspec import ArchConfig
from sysacc.nnir.graph import Graph, LayerNode


class Strategy(str, Enum):
    PARTITIONED_WEIGHT_STATIONARY = "partitioned_weight_stationary"
    LOCAL_RESIDENT = "local_resident"
    INPUT_STATIONARY = "input_stationary"


class ScheduleError(Exception):
    pass


class Infeasible(ScheduleError):
    def __init__(self, msg, layer_id=None):
        super().__init__(msg)
        self.layer_id = layer_id


class UnsupportedOp(ScheduleError):
    pass


@dataclass(frozen=True)
class ScheduleOptions:
    # Share of local memory one load-compute-save block may occupy under the
    # partitioned strategies; the rest is held back for the next block's loads.
    block_fraction: float = 0.5


DEFAULT_OPTIONS = ScheduleOptions()


@dataclass(frozen=True)
class Span:
    start: int
    stop: int

    def __len__(self):
        return max(0, self.stop - self.start)

    def __iter__(self):
        return iter(range(self.start, self.stop))

    def __str__(self):
        return f"[{self.start},{self.stop})"


def split(n: int, parts: int) -> list[Span]:
    """Cut ``range(n)`` into ``parts`` contiguous spans, larger spans first."""
    base, extra = divmod(n, parts)
    out, s = [], 0
    for i in range(parts):
        e = s + base + (1 if i < extra else 0)
        out.append(Span(s, e))
        s = e
    return out


@dataclass(frozen=True)
class Tile:
    m: int
    k: int
    n: int


@dataclass(frozen=True)
class Lowering:
    m: int
    k: int
    n: int
    in_h: int
    in_w: int
    in_c: int
    kh: int
    kw: int
    stride: int
    pad: int
    out_h: int
    out_w: int
    cols: int
    rows: int

    @property
    def in_groups(self) -> int:
        return -(-self.in_c // self.cols)

    @property
    def out_groups(self) -> int:
        return -(-self.n // self.cols)

    @property
    def group_weight_vectors(self) -> int:
        return self.k * self.rows + 1

    @property
    def weight_vectors(self) -> int:
        return self.out_groups * self.group_weight_vectors

    @property
    def needs_gather(self) -> bool:
        return not (self.kh == self.kw == 1 and self.stride == 1 and self.pad == 0
                    and self.in_c % self.cols == 0)

    def in_rows_for(self, out: Span) -> Span:
        lo = max(0, out.start * self.stride - self.pad)
        hi = min(self.in_h, (out.stop - 1) * self.stride - self.pad + self.kh)
        return Span(lo, hi)

    def group_channels(self, g: int) -> int:
        return min(self.cols, self.n - g * self.cols)


def lower_to_matmul(layer: LayerNode, g: Graph, cfg: ArchConfig) -> Lowering:
    x = g.node(layer.inputs[0]).out_shape
    y = layer.out_shape
    cols = cfg.array_cols
    if layer.op == "conv2d":
        kh, kw = layer.kernel()
        stride, pad = int(layer.attrs.get("stride", 1)), int(layer.attrs.get("padding", 0))
    elif layer.op == "dense":
        # a dense layer is a valid convolution whose kernel covers the whole input
        kh, kw, stride, pad = x.h, x.w, 1, 0
    else:
        raise UnsupportedOp(f"cannot lower {layer.op} to a matmul")
    return Lowering(
        m=y.h * y.w, k=-(-kh * kw * x.c // cols), n=y.c,
        in_h=x.h, in_w=x.w, in_c=x.c, kh=kh, kw=kw, stride=stride, pad=pad,
        out_h=y.h, out_w=y.w, cols=cols, rows=cfg.array_rows,
    )


@dataclass(frozen=True)
class Partition:
    input_window: Span          # input rows resident while computing
    input_load: Span            # input rows fetched from DRAM by this partition
    output_window: Span         # output rows produced
    groups: Span                # output channel groups produced
    weight_window: Span | None  # weight vectors fetched by this partition (input-stationary)
    tiles: tuple[Tile, ...]
    local_vectors_used: int
    accum_vectors_used: int

    @property
    def halo(self) -> Span:
        return Span(self.input_window.start, self.input_load.start)


@dataclass(frozen=True)
class Stage:
    weight_slice: Span | None   # weight vectors resident for the whole stage
    groups: Span
    rows: Span
    partitions: tuple[Partition, ...]
    # local-memory layout shared by the stage's partitions
    buffers: dict = field(default_factory=dict)
    window_rows: int = 0        # channel-group stride of the input window, in rows
    m_stride: int = 0           # channel-group stride of output/skip/im2col buffers, in vectors


@dataclass(frozen=True)
class TrafficStats:
    weight_bytes_loaded: int = 0
    input_bytes_loaded: int = 0
    output_bytes_stored: int = 0
    stage_count: int = 0
    partition_count: int = 0

    def __add__(self, o: "TrafficStats") -> "TrafficStats":
        return TrafficStats(*(a + b for a, b in zip(self.astuple(), o.astuple())))

    def astuple(self):
        return (self.weight_bytes_loaded, self.input_bytes_loaded, self.output_bytes_stored,
                self.stage_count, self.partition_count)

    @property
    def activation_bytes(self) -> int:
        return self.input_bytes_loaded + self.output_bytes_stored

    @property
    def total_bytes(self) -> int:
        return self.weight_bytes_loaded + self.activation_bytes


@dataclass(frozen=True)
class FusedLayer:
    """A scheduling unit: one compute node plus the add/relu folded into its epilogue."""

    primary: LayerNode
    add: LayerNode | None
    relu: LayerNode | None
    input: int
    skip: int | None
    output: int

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in (self.primary, self.add, self.relu) if n is not None)


@dataclass(frozen=True)
class LayerSchedule:
    layer_id: int
    name: str
    kind: str                    # "matmul" | "avgpool" | "eltwise"
    strategy: Strategy
    layer: FusedLayer
    lowering: Lowering | None
    stages: tuple[Stage, ...]
    traffic: TrafficStats
    # local_resident placement: tensor id -> local vector address
    pinned: dict = field(default_factory=dict)
    # tensors fetched from / stored to DRAM by this layer under local_resident
    loads_input: bool = True
    stores_output: bool = True

    @property
    def stage_count(self) -> int:
        return len(self.stages)

    @property
    def partition_count(self) -> int:
        return sum(len(s.partitions) for s in self.stages)


# --- fusion ----------------------------------------------------------------

def fuse(g: Graph) -> list[FusedLayer]:
    pos = {n.id: i for i, n in enumerate(g.nodes)}
    absorbed: set[int] = set()
    out = []

    def single_consumer(nid, op):
        cons = g.consumers(nid)
        if nid != g.output_id and len(cons) == 1 and cons[0].op == op:
            return cons[0]
        return None

    for n in g.nodes:
        if n.op == "input" or n.id in absorbed:
            continue
        if n.op in ("maxpool", "pad"):
            raise UnsupportedOp(f"node {n.id} ({n.op}) has no accelerator lowering")
        add = skip = relu = None
        cur = n
        if n.op in ("conv2d", "dense"):
            a = single_consumer(n.id, "add")
            if a is not None:
                other = a.inputs[1] if a.inputs[0] == n.id else a.inputs[0]
                if other != n.id and pos[other] < pos[n.id]:
                    add, skip, cur = a, other, a
        if n.op in ("conv2d", "dense", "add"):
            relu = single_consumer(cur.id, "relu")
            if relu is not None:
                cur = relu
        if n.op == "add":
            fl = FusedLayer(n, None, relu, n.inputs[0], n.inputs[1], cur.id)
        else:
            fl = FusedLayer(n, add, relu, n.inputs[0], skip, cur.id)
        absorbed.update(fl.node_ids)
        out.append(fl)
    return out


# --- capacity model --------------------------------------------------------

def _tensor_vectors(shape, cols) -> int:
    return -(-shape.c // cols) * shape.h * shape.w


def plan_windows(low: Lowering, spans: list[Span]) -> list[tuple[Span, Span]]:
    """(resident window, newly loaded rows) per output span; every input row loads once."""
    out, loaded = [], 0
    for i, sp in enumerate(spans):
        need = low.in_rows_for(sp)
        stop = low.in_h if i == len(spans) - 1 else max(need.stop, loaded)
        window = Span(min(need.start, loaded), stop)
        out.append((window, Span(loaded, stop)))
        loaded = stop
    return out


@dataclass
class _Plan:
    buffers: dict
    window_rows: int
    m_stride: int
    total: int
    accum: int
    per_partition: list


def _stage_plan(low: Lowering, row_spans: list[Span], slices: list[Span], has_skip: bool) -> _Plan:
    """Local layout shared by every block over ``row_spans`` x ``slices``; sizes are maxima."""
    wins = plan_windows(low, row_spans)
    S = max(len(w) for w, _ in wins)
    M = max(len(rs) for rs in row_spans) * low.out_w
    G = max(len(gs) for gs in slices)
    wg = low.group_weight_vectors
    sizes = {
        "weights": G * wg,
        "window": S * low.in_w * low.in_groups,
        "skip": M * G if has_skip else 0,
        "im2col": M * low.k if low.needs_gather else 0,
        "out": M * G,
    }
    buffers, addr = {}, 0
    for name, size in sizes.items():
        buffers[name] = addr
        addr += size
    per = []
    for rs, (win, _) in zip(row_spans, wins):
        m = len(rs) * low.out_w
        for gs in slices:
            used = (len(gs) * wg + len(win) * low.in_w * low.in_groups
                    + (m * len(gs) if has_skip else 0) + (m * low.k if low.needs_gather else 0)
                    + m * len(gs))
            per.append((used, m * len(gs)))
    return _Plan(buffers, S, M, addr, M * G, per)


def _fits(plan: _Plan, budget: int, accum: int) -> bool:
    return plan.total <= budget and plan.accum <= accum


def _tiles(low: Lowering, m: int, groups: Span) -> tuple[Tile, ...]:
    return tuple(Tile(m, low.k, low.group_channels(g)) for g in groups)


def _block_budget(cfg: ArchConfig, opts: ScheduleOptions) -> int:
    return int(cfg.local_vectors * opts.block_fraction)


def _schedule_ws(fl, low, cfg, opts, vb, in_vectors, skip_vectors, out_vectors) -> tuple:
    budget, acc = _block_budget(cfg, opts), cfg.accum_vectors
    ng, oh = low.out_groups, low.out_h
    has_skip = fl.skip is not None
    finest = split(oh, oh)
    for S in range(1, ng + 1):
        slices = split(ng, S)
        if all(_fits(_stage_plan(low, finest, [gs], has_skip),
                     budget, acc) for gs in slices):
            break
    else:
        raise Infeasible(f"layer {fl.primary.id} ({fl.primary.name}): a single output row of one "
                         f"channel group exceeds local memory", fl.primary.id)
    stages = []
    wg = low.group_weight_vectors
    for gs in slices:
        for P in range(1, oh + 1):
            spans = split(oh, P)
            plan = _stage_plan(low, spans, [gs], has_skip)
            if _fits(plan, budget, acc):
                break
        parts = []
        for (win, load), sp, (used, accu) in zip(plan_windows(low, spans), spans, plan.per_partition):
            parts.append(Partition(win, load, sp, gs, None, _tiles(low, len(sp) * low.out_w, gs),
                                   used, accu))
        stages.append(Stage(Span(gs.start * wg, gs.stop * wg), gs, Span(0, oh), tuple(parts),
                            plan.buffers, plan.window_rows, plan.m_stride))
    traffic = TrafficStats(
        weight_bytes_loaded=low.weight_vectors * vb,
        input_bytes_loaded=(S * in_vectors + skip_vectors) * vb,
        output_bytes_stored=out_vectors * vb,
        stage_count=len(stages),
        partition_count=sum(len(s.partitions) for s in stages),
    )
    return tuple(stages), traffic


def _schedule_is(fl, low, cfg, opts, vb, in_vectors, skip_vectors, out_vectors) -> tuple:
    budget, acc = _block_budget(cfg, opts), cfg.accum_vectors
    ng, oh = low.out_groups, low.out_h
    has_skip = fl.skip is not None
    # one layout for all stages so halo rows can move within the window buffer
    for S in range(1, oh + 1):
        row_spans = split(oh, S)
        if _fits(_stage_plan(low, row_spans, split(ng, ng), has_skip), budget, acc):
            break
    else:
        raise Infeasible(f"layer {fl.primary.id} ({fl.primary.name}): one output row with one "
                         f"channel group exceeds local memory", fl.primary.id)
    for P in range(1, ng + 1):
        slices = split(ng, P)
        plan = _stage_plan(low, row_spans, slices, has_skip)
        if _fits(plan, budget, acc):
            break
    wg = low.group_weight_vectors
    stages = []
    usage = iter(plan.per_partition)
    for rs, (win, load) in zip(row_spans, plan_windows(low, row_spans)):
        m = len(rs) * low.out_w
        parts = []
        for gs in slices:
            used, accu = next(usage)
            # the whole window stays resident; only the first partition streams rows in
            ld = load if gs.start == 0 else Span(load.stop, load.stop)
            parts.append(Partition(win, ld, rs, gs, Span(gs.start * wg, gs.stop * wg),
                                   _tiles(low, m, gs), used, accu))
        stages.append(Stage(None, Span(0, ng), rs, tuple(parts), plan.buffers,
                            plan.window_rows, plan.m_stride))
    traffic = TrafficStats(
        weight_bytes_loaded=S * low.weight_vectors * vb,
        input_bytes_loaded=(in_vectors + skip_vectors) * vb,
        output_bytes_stored=out_vectors * vb,
        stage_count=len(stages),
        partition_count=sum(len(s.partitions) for s in stages),
    )
    return tuple(stages), traffic


def _simd_layer(fl: FusedLayer, g: Graph, cfg: ArchConfig, opts, strategy) -> tuple:
    cols, vb = cfg.array_cols, cfg.vector_bytes
    budget = _block_budget(cfg, opts)
    x = g.node(fl.input).out_shape
    y = fl.primary.out_shape
    cg = -(-x.c // cols)
    in_vec = _tensor_vectors(x, cols)
    out_vec = _tensor_vectors(y, cols)
    n_in = 2 if fl.primary.op == "add" else 1
    if fl.primary.op == "avgpool_global":
        kind = "avgpool"
        need = in_vec + out_vec
        if need > budget:
            raise Infeasible(f"layer {fl.primary.id}: pooled tensor does not fit local memory",
                             fl.primary.id)
        part = Partition(Span(0, x.h), Span(0, x.h), Span(0, 1), Span(0, cg), None, (), need, 0)
        stage = Stage(None, Span(0, cg), Span(0, 1), (part,), {"window": 0, "out": in_vec},
                      x.h, x.h * x.w)
        return kind, (stage,), TrafficStats(0, in_vec * vb, out_vec * vb, 1, 1)
    kind = "eltwise"
    for P in range(1, y.h + 1):
        spans = split(y.h, P)
        M = len(spans[0]) * y.w
        if (n_in + 1) * M * cg <= budget:
            break
    else:
        raise Infeasible(f"layer {fl.primary.id}: one row does not fit local memory", fl.primary.id)
    parts = tuple(
        Partition(sp, sp, sp, Span(0, cg), None, (), (n_in + 1) * len(sp) * y.w * cg, 0)
        for sp in spans
    )
    bufs = {"window": 0, "skip": M * cg, "out": n_in * M * cg}
    stage = Stage(None, Span(0, cg), Span(0, y.h), parts, bufs, len(spans[0]), M)
    traffic = TrafficStats(0, n_in * in_vec * vb, out_vec * vb, 1, len(parts))
    return kind, (stage,), traffic


def schedule_layer(fl: FusedLayer, g: Graph, cfg: ArchConfig,
                   strategy: Strategy = Strategy.PARTITIONED_WEIGHT_STATIONARY,
                   opts: ScheduleOptions = DEFAULT_OPTIONS) -> LayerSchedule:
    """Schedule one fused layer under a partitioned strategy.

    ``local_resident`` needs whole-graph placement; use :func:`schedule_graph` for it.
    """
    strategy = Strategy(strategy)
    if strategy is Strategy.LOCAL_RESIDENT:
        raise ScheduleError("local_resident is a whole-graph strategy; use schedule_graph")
    n = fl.primary
    if n.op not in ("conv2d", "dense"):
        kind, stages, traffic = _simd_layer(fl, g, cfg, opts, strategy)
        return LayerSchedule(n.id, n.name, kind, strategy, fl, None, stages, traffic)
    low = lower_to_matmul(n, g, cfg)
    cols, vb = cfg.array_cols, cfg.vector_bytes
    in_vec = _tensor_vectors(g.node(fl.input).out_shape, cols)
    out_vec = _tensor_vectors(n.out_shape, cols)
    skip_vec = out_vec if fl.skip is not None else 0
    fn = _schedule_ws if strategy is Strategy.PARTITIONED_WEIGHT_STATIONARY else _schedule_is
    stages, traffic = fn(fl, low, cfg, opts, vb, in_vec, skip_vec, out_vec)
    return LayerSchedule(n.id, n.name, "matmul", strategy, fl, low, stages, traffic)


# --- local-resident placement ------------------------------------------------

class FreeList:
    """First-fit allocator over a vector address space."""

    def __init__(self, size: int):
        self.size = size
        self.free = [(0, size)]
        self.peak = 0

    def alloc(self, n: int) -> int | None:
        if n == 0:
            return 0
        for i, (start, length) in enumerate(self.free):
            if length >= n:
                if length == n:
                    del self.free[i]
                else:
                    self.free[i] = (start + n, length - n)
                self.peak = max(self.peak, start + n)
                return start
        return None

    def release(self, addr: int, n: int) -> None:
        if n == 0:
            return
        self.free.append((addr, n))
        self.free.sort()
        merged = []
        for s, length in self.free:
            if merged and merged[-1][0] + merged[-1][1] == s:
                merged[-1] = (merged[-1][0], merged[-1][1] + length)
            else:
                merged.append((s, length))
        self.free = merged


def _schedule_resident(g: Graph, layers: list[FusedLayer], cfg: ArchConfig) -> list[LayerSchedule]:
    cols, vb = cfg.array_cols, cfg.vector_bytes
    last_use: dict[int, int] = {}
    for i, fl in enumerate(layers):
        for t in (fl.input, fl.skip):
            if t is not None:
                last_use[t] = i
    last_use[g.output_id] = len(layers)

    def tvec(t):
        return _tensor_vectors(g.node(t).out_shape, cols)

    mem = FreeList(cfg.local_vectors)
    addr: dict[int, int] = {}
    in_addr = mem.alloc(tvec(g.input_id))
    if in_addr is None:
        raise Infeasible("graph input does not fit local memory", g.input_id)
    addr[g.input_id] = in_addr
    input_loaded = False
    out = []
    for i, fl in enumerate(layers):
        n = fl.primary
        oaddr = mem.alloc(tvec(fl.output))
        if oaddr is None:
            raise Infeasible(f"layer {n.id} ({n.name}) output does not fit local memory "
                             f"under local_resident", n.id)
        addr[fl.output] = oaddr
        low = lower_to_matmul(n, g, cfg) if n.op in ("conv2d", "dense") else None
        loads_input = fl.input == g.input_id and not input_loaded
        input_loaded = input_loaded or loads_input
        stores = fl.output == g.output_id
        in_vec = tvec(fl.input)
        out_vec = tvec(fl.output)
        if low is not None:
            scratch = {"weights": low.weight_vectors,
                       "im2col": low.m * low.k if low.needs_gather else 0}
            bufs = {}
            for name, size in scratch.items():
                a = mem.alloc(size)
                if a is None:
                    raise Infeasible(f"layer {n.id} ({n.name}) does not fit local memory "
                                     f"under local_resident", n.id)
                bufs[name] = a
            if low.m * low.out_groups > cfg.accum_vectors:
                raise Infeasible(f"layer {n.id} ({n.name}) exceeds accumulators under "
                                 f"local_resident", n.id)
            live = cfg.local_vectors - sum(length for _, length in mem.free)
            gs = Span(0, low.out_groups)
            bufs.update(window=addr[fl.input], out=oaddr)
            if fl.skip is not None:
                bufs["skip"] = addr[fl.skip]
            part = Partition(Span(0, low.in_h), Span(0, low.in_h) if loads_input else Span(0, 0),
                             Span(0, low.out_h), gs, None, _tiles(low, low.m, gs), live,
                             low.m * low.out_groups)
            stage = Stage(Span(0, low.weight_vectors), gs, Span(0, low.out_h), (part,), bufs,
                          low.in_h, low.m)
            traffic = TrafficStats(low.weight_vectors * vb, in_vec * vb if loads_input else 0,
                                   out_vec * vb if stores else 0, 1, 1)
            for name, size in scratch.items():
                mem.release(bufs[name], size)
            kind = "matmul"
        else:
            x = g.node(fl.input).out_shape
            cg = -(-x.c // cols)
            live = cfg.local_vectors - sum(length for _, length in mem.free)
            bufs = {"window": addr[fl.input], "out": oaddr}
            if fl.skip is not None:
                bufs["skip"] = addr[fl.skip]
            kind = "avgpool" if n.op == "avgpool_global" else "eltwise"
            oh = fl.primary.out_shape.h
            part = Partition(Span(0, x.h), Span(0, x.h) if loads_input else Span(0, 0),
                             Span(0, oh), Span(0, cg), None, (), live, 0)
            stage = Stage(None, Span(0, cg), Span(0, oh), (part,), bufs, x.h,
                          x.h * x.w)
            n_in = 2 if n.op == "add" else 1
            traffic = TrafficStats(0, n_in * in_vec * vb if loads_input else 0,
                                   out_vec * vb if stores else 0, 1, 1)
        pinned = {t: addr[t] for t in (fl.input, fl.skip, fl.output) if t is not None}
        out.append(LayerSchedule(n.id, n.name, kind, Strategy.LOCAL_RESIDENT, fl, low, (stage,),
                                 traffic, pinned, loads_input, stores))
        for t in (fl.input, fl.skip):
            if t is not None and last_use.get(t) == i and t in addr:
                mem.release(addr.pop(t), tvec(t))
    return out


# --- graph level -------------------------------------------------------------

def schedule_graph(g: Graph, cfg: ArchConfig,
                   strategy: Strategy = Strategy.PARTITIONED_WEIGHT_STATIONARY,
                   opts: ScheduleOptions = DEFAULT_OPTIONS) -> list[LayerSchedule]:
    strategy = Strategy(strategy)
    if not g.nodes:
        return []
    layers = fuse(g)
    if strategy is Strategy.LOCAL_RESIDENT:
        return _schedule_resident(g, layers, cfg)
    return [schedule_layer(fl, g, cfg, strategy, opts) for fl in layers]


def choose_strategy(g: Graph, cfg: ArchConfig) -> Strategy:
    """Keep every layer resident when local memory allows, else fall back to partitioning."""
    try:
        schedule_graph(g, cfg, Strategy.LOCAL_RESIDENT)
        return Strategy.LOCAL_RESIDENT
    except Infeasible:
        return Strategy.PARTITIONED_WEIGHT_STATIONARY


def traffic_totals(schedules) -> TrafficStats:
    total = TrafficStats()
    for s in schedules:
        total = total + s.traffic
    return total


def dump(schedules, cfg: ArchConfig) -> str:
    """Text report: per-layer stage/partition tree with vector budgets and byte counters."""
    lines = []
    cap, acc = cfg.local_vectors, cfg.accum_vectors
    for s in schedules:
        t = s.traffic
        lines.append(
            f"layer {s.layer_id} {s.name or s.layer.primary.op} [{s.kind}, {s.strategy.value}] "
            f"nodes={list(s.layer.node_ids)} stages={s.stage_count} partitions={s.partition_count} "
            f"weights={t.weight_bytes_loaded}B in={t.input_bytes_loaded}B out={t.output_bytes_stored}B"
        )
        for si, st in enumerate(s.stages):
            ws = f" weights{st.weight_slice}" if st.weight_slice is not None else ""
            lines.append(f"  stage {si}: groups{st.groups} rows{st.rows}{ws}")
            for pi, p in enumerate(st.partitions):
                ww = f" weights{p.weight_window}" if p.weight_window is not None else ""
                lines.append(
                    f"    partition {pi}: out rows{p.output_window} groups{p.groups} "
                    f"in window{p.input_window} load{p.input_load}{ww} "
                    f"local {p.local_vectors_used}/{cap} accum {p.accum_vectors_used}/{acc}"
                )
    tot = traffic_totals(schedules)
    lines.append(
        f"total: weights={tot.weight_bytes_loaded}B in={tot.input_bytes_loaded}B "
        f"out={tot.output_bytes_stored}B stages={tot.stage_count} partitions={tot.partition_count}"
    )
    return "\n".join(lines) + "\n"


def counters(schedules) -> list[dict]:
    """Machine-readable per-layer counters."""
    return [
        {"layer": s.layer_id, "name": s.name, "kind": s.kind, "stages": s.stage_count,
         "partitions": s.partition_count, "weight_bytes": s.traffic.weight_bytes_loaded,
         "input_bytes": s.traffic.input_bytes_loaded, "output_bytes": s.traffic.output_bytes_stored}
        for s in schedules
    ]
