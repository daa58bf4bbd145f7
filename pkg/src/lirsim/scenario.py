"""Scenario description, INI-style config parsing and validation.

A config has ``[constellation]``, ``[link]``, ``[routing]``, ``[failures]``,
``[run]`` sections, one ``[flow.<name>]`` section per flow, and optionally
a ``[sweep]`` section whose ``section.key = v1 | v2`` lines expand into the
Cartesian product of variants. Keys joined by ``&`` vary together
(``routing.scheme & failures.management = ospf & ospf-lsa | optimal & odr``)
and ``flow.<name>.<key>`` sweeps a flow field. Each variant's name gets a
``[key=value,...]`` suffix. Satellites are written ``S<orbit>,<slot>`` with
1-based indices.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

SCHEMES = ("source", "optimal", "elr", "ospf", "multicast-spf", "multicast-pnb")
MANAGEMENT = ("none", "lsa", "odr", "odd", "ospf-lsa")
PATTERNS = ("cbr", "poisson")
PRESETS = ("fig4", "fig8", "fig9", "fig10", "fig11", "fig12", "fig13", "appendix")


class ConfigError(ValueError):
    """Bad scenario; the message names the offending section.key and line."""

    def __init__(self, msg: str, field: str = ""):
        super().__init__(msg)
        self.field = field


@dataclass(frozen=True)
class FlowSpec:
    name: str
    src: str
    dests: tuple[str, ...]
    rate_pps: float = 0.0
    rate_bps: float = 0.0
    pattern: str = "cbr"
    start: float = 0.0
    duration: float = -1.0

    def packets_per_second(self, payload_bits: int) -> float:
        if self.rate_bps > 0:
            return self.rate_bps / payload_bits
        return self.rate_pps


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    # constellation
    orbits: int = 6
    sats_per_orbit: int = 11
    altitude_km: float = 780.0
    inclination_deg: float = 86.4
    seam: bool = False
    moving: bool = False
    # link
    bandwidth_bps: int = 10_000_000
    queue_capacity: int = 1000
    # routing
    scheme: str = "optimal"
    m: Optional[int] = None
    k: int = 5
    tau_s: float = 10e-6
    payload_bits: int = 8192
    ttl: int = 64
    dead_end: str = "drop"
    loop_guard: bool = True
    # failures
    management: str = "none"
    failure_rate: float = 0.0
    mttr_s: float = 1.0
    hello_interval_s: float = 1.0
    odd_fallback: bool = False
    odr_replan: str = "single"
    failed_links: tuple[str, ...] = ()
    # run
    horizon_s: float = 1.0
    seeds: tuple[int, ...] = (1,)
    flows: tuple[FlowSpec, ...] = ()

    def digest(self) -> str:
        """Short stable hash of the serialized scenario (provenance tag)."""
        return hashlib.sha256(dump(self).encode()).hexdigest()[:12]


_FIELD_SECTION = {
    "orbits": "constellation", "sats_per_orbit": "constellation", "altitude_km": "constellation",
    "inclination_deg": "constellation", "seam": "constellation", "moving": "constellation",
    "bandwidth_bps": "link", "queue_capacity": "link",
    "scheme": "routing", "m": "routing", "k": "routing", "tau_s": "routing", "payload_bits": "routing",
    "ttl": "routing", "dead_end": "routing", "loop_guard": "routing",
    "management": "failures", "failure_rate": "failures", "mttr_s": "failures",
    "hello_interval_s": "failures", "odd_fallback": "failures", "odr_replan": "failures",
    "failed_links": "failures",
    "name": "run", "horizon_s": "run", "seeds": "run",
}
_SECTIONS = ("constellation", "link", "routing", "failures", "run")
_FLOW_KEYS = ("src", "dests", "rate_pps", "rate_bps", "pattern", "start", "duration")


def parse_range(text: str) -> tuple[int, ...]:
    """``1..5`` or ``1,3,7`` or a mix: ``1..3,10``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError(f"empty range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError("empty list")
    return tuple(out)


def _fmt_range(vals: tuple[int, ...]) -> str:
    if len(vals) > 2 and list(vals) == list(range(vals[0], vals[-1] + 1)):
        return f"{vals[0]}..{vals[-1]}"
    return ",".join(map(str, vals))


_SAT_RE = re.compile(r"S\d+,\d+")


def _split_sats(text: str) -> tuple[str, ...]:
    sats = tuple(_SAT_RE.findall(text.replace(" ", "")))
    rest = _SAT_RE.sub("", text.replace(" ", "")).replace(";", "").replace(",", "")
    if rest or not sats:
        raise ValueError(f"expected satellites like S1,2; got {text!r}")
    return sats


def sat_coords(name: str) -> tuple[int, int]:
    """1-based (orbit, slot) of a satellite written ``S<orbit>,<slot>``."""
    o, sl = name.strip()[1:].split(",")
    return int(o), int(sl)


def _coerce(name: str, raw: str) -> Any:
    f = {fl.name: fl for fl in dataclasses.fields(Scenario)}[name]
    t = str(f.type)
    raw = raw.strip()
    if name == "m":
        return None if raw.lower() == "optimal" else int(raw)
    if name == "seeds":
        return parse_range(raw)
    if name == "failed_links":
        if not raw:
            return ()
        return tuple(p.strip() for p in raw.split(";") if p.strip())
    if t == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected boolean, got {raw!r}")
    if t == "int":
        return int(raw)
    if t == "float":
        return float(raw)
    return raw


def _fmt(name: str, value: Any) -> str:
    if name == "m":
        return "optimal" if value is None else str(value)
    if name == "seeds":
        return _fmt_range(value)
    if name == "failed_links":
        return "; ".join(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class _Parser(configparser.ConfigParser):
    """Keeps the line number of every key for error messages."""

    def __init__(self):
        super().__init__(interpolation=None, strict=True, delimiters=("=",), comment_prefixes=("#", ";"),
                         inline_comment_prefixes=("#",))
        self.optionxform = str  # keep key case
        self.lines: dict[tuple[str, str], int] = {}

    def read_text(self, text: str, source: str) -> None:
        section = None
        for no, line in enumerate(text.splitlines(), 1):
            s = line.strip()
            m = re.match(r"\[(.+)\]$", s)
            if m:
                section = m.group(1).strip()
                self.lines[(section, "")] = no
            elif section and "=" in s and not s.startswith(("#", ";")):
                self.lines[(section, s.split("=", 1)[0].strip())] = no
        try:
            self.read_string(text, source)
        except configparser.Error as e:
            raise ConfigError(f"{source}: {e}") from None


def _where(p: _Parser, section: str, key: str = "") -> str:
    line = p.lines.get((section, key)) or p.lines.get((section, ""))
    loc = f"{section}.{key}" if key else section
    return f"{loc} (line {line})" if line else loc


def loads(text: str, source: str = "<config>") -> list[Scenario]:
    """Parse a config into its scenarios (one per sweep combination)."""
    p = _Parser()
    p.read_text(text, source)
    values: dict[str, Any] = {}
    flows: list[FlowSpec] = []
    sweep: list[tuple[str, list[str]]] = []
    for section in p.sections():
        if section.startswith("flow."):
            flows.append(_parse_flow(p, section, source))
            continue
        if section == "sweep":
            for key, raw in p.items(section):
                keys = [k.strip() for k in key.split("&")]
                for k in keys:
                    if not _sweepable(k):
                        raise ConfigError(f"{source}: {_where(p, section, key)}: unknown sweep key {k!r}")
                options = []
                for alt in raw.split("|"):
                    vals = [v.strip() for v in alt.split("&")]
                    if len(vals) != len(keys):
                        raise ConfigError(f"{source}: {_where(p, section, key)}: "
                                          f"expected {len(keys)} values separated by '&', got {alt.strip()!r}")
                    options.append(list(zip(keys, vals)))
                sweep.append((key, options))
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"{source}: {_where(p, section)}: unknown section [{section}]")
        for key, raw in p.items(section):
            if _FIELD_SECTION.get(key) != section:
                raise ConfigError(f"{source}: {_where(p, section, key)}: unknown key {key!r}")
            try:
                values[key] = _coerce(key, raw)
            except ValueError as e:
                raise ConfigError(f"{source}: {_where(p, section, key)}: {e}") from None
    base = Scenario(**values, flows=tuple(flows))
    combos: list[list[tuple[str, str, str]]] = [[]]
    for line_key, options in sweep:
        combos = [c + [(line_key, k, v) for k, v in o] for c in combos for o in options]
    out = []
    for combo in combos:
        over: dict[str, Any] = {}
        flow_over: dict[str, dict[str, Any]] = {}
        for line_key, key, raw in combo:
            try:
                if key.startswith("flow."):
                    _, fname, fkey = key.split(".", 2)
                    flow_over.setdefault(fname, {})[fkey] = _coerce_flow(fkey, raw)
                else:
                    name = key.split(".", 1)[1]
                    over[name] = _coerce(name, raw)
            except ValueError as e:
                raise ConfigError(f"{source}: {_where(p, 'sweep', line_key)}: {e}") from None
        if flow_over:
            unknown = set(flow_over) - {f.name for f in flows}
            if unknown:
                raise ConfigError(f"{source}: {_where(p, 'sweep')}: no flow named {sorted(unknown)[0]!r}")
            over["flows"] = tuple(dataclasses.replace(f, **flow_over.get(f.name, {})) for f in flows)
        if combo:
            tag = ",".join(f"{key.rsplit('.', 1)[1] if not key.startswith('flow.') else key[5:]}={raw}"
                           for _, key, raw in combo)
            over["name"] = f"{over.get('name', base.name)}[{tag}]"
        scn = dataclasses.replace(base, **over) if over else base
        try:
            validate(scn)
        except ConfigError as e:
            section, _, key = e.field.rpartition(".")
            line = p.lines.get((section, key)) or p.lines.get((e.field, ""))
            loc = f" (line {line})" if line else ""
            raise ConfigError(f"{source}: {e.field}{loc}: {e.args[0].split(': ', 1)[1]}", e.field) from None
        out.append(scn)
    return out


def _sweepable(key: str) -> bool:
    parts = key.split(".")
    if len(parts) == 3 and parts[0] == "flow":
        return parts[2] in _FLOW_KEYS
    return len(parts) == 2 and _FIELD_SECTION.get(parts[1]) == parts[0]


def _coerce_flow(key: str, raw: str) -> Any:
    if key == "src":
        sats = _split_sats(raw)
        if len(sats) != 1:
            raise ValueError("a flow has exactly one source")
        return sats[0]
    if key == "dests":
        return _split_sats(raw)
    if key == "pattern":
        return raw.strip()
    return float(raw)


def _parse_flow(p: _Parser, section: str, source: str) -> FlowSpec:
    name = section.split(".", 1)[1]
    kw: dict[str, Any] = {"name": name}
    for key, raw in p.items(section):
        where = _where(p, section, key)
        if key not in _FLOW_KEYS:
            raise ConfigError(f"{source}: {where}: unknown flow key {key!r}")
        try:
            kw[key] = _coerce_flow(key, raw)
        except ValueError as e:
            raise ConfigError(f"{source}: {where}: {e}") from None
    for req in ("src", "dests"):
        if req not in kw:
            raise ConfigError(f"{source}: {_where(p, section)}: flow needs {req!r}")
    return FlowSpec(**kw)


def validate(s: Scenario) -> None:
    def bad(key: str, msg: str):
        field = f"{_FIELD_SECTION.get(key, 'flow')}.{key}"
        raise ConfigError(f"{field}: {msg}", field)

    if s.orbits < 2:
        bad("orbits", "need at least 2 orbits")
    if s.sats_per_orbit < 3:
        bad("sats_per_orbit", "need at least 3 satellites per orbit")
    if s.bandwidth_bps <= 0:
        bad("bandwidth_bps", "must be positive")
    if s.queue_capacity < 1:
        bad("queue_capacity", "must be >= 1")
    if s.scheme not in SCHEMES:
        bad("scheme", f"must be one of {', '.join(SCHEMES)}")
    if s.management not in MANAGEMENT:
        bad("management", f"must be one of {', '.join(MANAGEMENT)}")
    if (s.scheme == "ospf") != (s.management == "ospf-lsa"):
        bad("management", "ospf routing and ospf-lsa management go together")
    if s.m is not None and s.m < 1:
        bad("m", "must be >= 1 or 'optimal'")
    if s.k < 1:
        bad("k", "must be >= 1")
    if s.tau_s <= 0 or s.payload_bits <= 0:
        bad("tau_s" if s.tau_s <= 0 else "payload_bits", "must be positive")
    if not 1 <= s.ttl <= 255:
        bad("ttl", "must be in 1..255")
    if s.dead_end not in ("drop", "reencode"):
        bad("dead_end", "must be drop or reencode")
    if not 0.0 <= s.failure_rate < 1.0:
        bad("failure_rate", "must be in [0, 1)")
    if s.mttr_s <= 0 or s.hello_interval_s <= 0:
        bad("mttr_s" if s.mttr_s <= 0 else "hello_interval_s", "must be positive")
    if s.odd_fallback and s.management != "odd":
        bad("odd_fallback", "only meaningful with management = odd")
    if s.odr_replan not in ("single", "dp"):
        bad("odr_replan", "must be single or dp")
    if s.scheme.startswith("multicast") and s.management != "none":
        bad("management", "multicast runs without failure management")
    if s.horizon_s <= 0:
        bad("horizon_s", "must be positive")
    names = set()
    for f in s.flows:
        where = f"flow.{f.name}"
        if f.name in names:
            raise ConfigError(f"{where}: duplicate flow name", where)
        names.add(f.name)
        if f.pattern not in PATTERNS:
            raise ConfigError(f"{where}.pattern: must be cbr or poisson", f"{where}.pattern")
        if f.rate_pps < 0 or f.rate_bps < 0 or (f.rate_pps > 0 and f.rate_bps > 0):
            raise ConfigError(f"{where}: give one non-negative rate (rate_pps or rate_bps)", where)
        if s.scheme.startswith("multicast") and len(f.dests) > 8:
            raise ConfigError(f"{where}.dests: multicast supports at most 8 destinations", f"{where}.dests")
        for sat in (f.src,) + f.dests:
            o, sl = sat_coords(sat)
            if not (1 <= o <= s.orbits and 1 <= sl <= s.sats_per_orbit):
                raise ConfigError(f"{where}: satellite {sat} outside {s.orbits}x{s.sats_per_orbit} grid", where)
        if f.src in f.dests:
            raise ConfigError(f"{where}.dests: source cannot be a destination", f"{where}.dests")
    for link in s.failed_links:
        parts = _split_sats(link.replace("->", ","))
        if len(parts) != 2:
            raise ConfigError(f"failures.failed_links: expected 'S1,1 -> S2,1', got {link!r}",
                              "failures.failed_links")


def dump(s: Scenario) -> str:
    """Serialize to the config format; ``loads(dump(s)) == [s]``."""
    lines: list[str] = []
    for section in _SECTIONS:
        lines.append(f"[{section}]")
        for f in dataclasses.fields(Scenario):
            if _FIELD_SECTION.get(f.name) == section:
                lines.append(f"{f.name} = {_fmt(f.name, getattr(s, f.name))}")
        lines.append("")
    for fl in s.flows:
        lines.append(f"[flow.{fl.name}]")
        lines.append(f"src = {fl.src}")
        lines.append(f"dests = {' '.join(fl.dests)}")
        for key in ("rate_pps", "rate_bps", "start", "duration"):
            lines.append(f"{key} = {getattr(fl, key)!r}")
        lines.append(f"pattern = {fl.pattern}")
        lines.append("")
    return "\n".join(lines)


def load(path: str | Path) -> list[Scenario]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return loads(text, str(path))


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("lirsim").joinpath("presets", f"{name}.cfg").read_text()


def load_preset(name: str) -> list[Scenario]:
    return loads(preset_text(name), f"preset:{name}")
