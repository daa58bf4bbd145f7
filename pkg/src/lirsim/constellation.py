"""Polar-constellation grid topology with unidirectional link identifiers.

Satellites are indexed ``orbit * S + slot`` (0-based). Each satellite has up
to four outgoing ISLs, visited in a fixed direction order when link ids are
assigned, so ids are dense from 1 and the lowest id of a satellite is always
its intra-orbit forward link.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

EARTH_RADIUS_KM = 6371.0
LIGHT_SPEED_KM_S = 299_792.458
EARTH_MU_KM3_S2 = 398_600.4418

INTRA_FWD = "intra-fwd"
INTRA_BACK = "intra-back"
INTER_RIGHT = "inter-right"
INTER_LEFT = "inter-left"
DIRECTIONS = (INTRA_FWD, INTRA_BACK, INTER_RIGHT, INTER_LEFT)
# (d_orbit, d_slot) for each direction
OFFSETS = {INTRA_FWD: (0, 1), INTRA_BACK: (0, -1), INTER_RIGHT: (1, 0), INTER_LEFT: (-1, 0)}
OPPOSITE = {INTRA_FWD: INTRA_BACK, INTRA_BACK: INTRA_FWD, INTER_RIGHT: INTER_LEFT, INTER_LEFT: INTER_RIGHT}


class TopologyError(ValueError):
    pass


@dataclass
class Constellation:
    orbits: int
    sats_per_orbit: int
    altitude_km: float = 780.0
    inclination_deg: float = 86.4
    seam: bool = False
    # index 0 unused so that link_src[lid] works with ids starting at 1
    link_src: list[int] = field(default_factory=list, repr=False)
    link_dst: list[int] = field(default_factory=list, repr=False)
    link_dir: list[str] = field(default_factory=list, repr=False)
    reverse: list[int] = field(default_factory=list, repr=False)
    out_links: list[tuple[tuple[int, int], ...]] = field(default_factory=list, repr=False)
    in_links: list[tuple[tuple[int, int], ...]] = field(default_factory=list, repr=False)
    up: list[bool] = field(default_factory=list, repr=False)
    last_change: list[float] = field(default_factory=list, repr=False)
    route_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_sats(self) -> int:
        return self.orbits * self.sats_per_orbit

    @property
    def num_links(self) -> int:
        return len(self.link_src) - 1

    def link_ids(self) -> range:
        return range(1, len(self.link_src))

    def sat(self, orbit: int, slot: int) -> int:
        return (orbit % self.orbits) * self.sats_per_orbit + slot % self.sats_per_orbit

    def coords(self, sat: int) -> tuple[int, int]:
        self._check_sat(sat)
        return divmod(sat, self.sats_per_orbit)

    def name(self, sat: int) -> str:
        o, s = self.coords(sat)
        return f"S{o + 1},{s + 1}"

    def parse_sat(self, text: str) -> int:
        """Accept ``S2,3`` (1-based, as in figure labels) or a bare index."""
        t = text.strip()
        if t[:1] in ("S", "s"):
            try:
                o, s = (int(v) for v in t[1:].split(","))
            except ValueError:
                raise TopologyError(f"bad satellite name {text!r}") from None
            if not (1 <= o <= self.orbits and 1 <= s <= self.sats_per_orbit):
                raise TopologyError(f"satellite {text!r} outside {self.orbits}x{self.sats_per_orbit} grid")
            return self.sat(o - 1, s - 1)
        try:
            idx = int(t)
        except ValueError:
            raise TopologyError(f"bad satellite name {text!r}") from None
        self._check_sat(idx)
        return idx

    def _check_sat(self, sat: int) -> None:
        if not 0 <= sat < self.num_sats:
            raise TopologyError(f"unknown satellite {sat}")

    def _check_link(self, link: int) -> None:
        if not 1 <= link < len(self.link_src):
            raise TopologyError(f"unknown link id {link}")

    def neighbors_out(self, sat: int) -> tuple[tuple[int, int], ...]:
        """(LinkId, neighbour) pairs in direction order."""
        self._check_sat(sat)
        return self.out_links[sat]

    def neighbors_in(self, sat: int) -> tuple[tuple[int, int], ...]:
        self._check_sat(sat)
        return self.in_links[sat]

    def link_between(self, src: int, dst: int) -> int:
        for lid, nbr in self.out_links[src]:
            if nbr == dst:
                return lid
        raise TopologyError(f"no ISL from {self.name(src)} to {self.name(dst)}")

    def endpoints(self, link: int) -> tuple[int, int]:
        self._check_link(link)
        return self.link_src[link], self.link_dst[link]

    def physical(self, link: int) -> int:
        """Canonical id of the physical ISL: the smaller of the two directions."""
        return min(link, self.reverse[link])

    # -- link state -------------------------------------------------------

    def set_link_state(self, link: int, up: bool, t: float = 0.0) -> None:
        """Both directions of a physical ISL change together."""
        self._check_link(link)
        for lid in (link, self.reverse[link]):
            if self.up[lid] != up:
                self.up[lid] = up
                self.last_change[lid] = t

    def is_up(self, link: int) -> bool:
        return self.up[link]

    def down_links(self) -> frozenset[int]:
        return frozenset(lid for lid in self.link_ids() if not self.up[lid])

    def reset_link_states(self) -> None:
        self.up = [True] * len(self.link_src)
        self.last_change = [0.0] * len(self.link_src)

    # -- geometry ---------------------------------------------------------

    @property
    def orbit_radius_km(self) -> float:
        return EARTH_RADIUS_KM + self.altitude_km

    @property
    def angular_rate(self) -> float:
        return math.sqrt(EARTH_MU_KM3_S2 / self.orbit_radius_km ** 3)

    def position(self, sat: int, t: float = 0.0) -> tuple[float, float, float]:
        """ECI position (km) on a circular orbit.

        Planes are spread over 180 degrees of RAAN (star pattern) with zero
        phase offset between planes.
        """
        o, s = self.coords(sat)
        r = self.orbit_radius_km
        raan = math.pi * o / self.orbits
        u = 2.0 * math.pi * s / self.sats_per_orbit + self.angular_rate * t
        inc = math.radians(self.inclination_deg)
        cu, su = math.cos(u), math.sin(u)
        co, so = math.cos(raan), math.sin(raan)
        return (
            r * (co * cu - so * su * math.cos(inc)),
            r * (so * cu + co * su * math.cos(inc)),
            r * su * math.sin(inc),
        )

    def propagation_delay(self, link: int, t: float = 0.0) -> float:
        """Chord length between the endpoints divided by the speed of light (s)."""
        a, b = self.endpoints(link)
        return math.dist(self.position(a, t), self.position(b, t)) / LIGHT_SPEED_KM_S

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["link_id", "src_orbit", "src_slot", "dst_orbit", "dst_slot", "direction"])
        for lid in self.link_ids():
            so, ss = self.coords(self.link_src[lid])
            do, ds = self.coords(self.link_dst[lid])
            w.writerow([lid, so, ss, do, ds, self.link_dir[lid]])
        return buf.getvalue()


def build(orbits: int, sats_per_orbit: int, altitude_km: float = 780.0, seam: bool = False,
          inclination_deg: float = 86.4) -> Constellation:
    """Grid of ``orbits`` x ``sats_per_orbit`` satellites with torus wrap.

    With ``seam`` the inter-orbit ISLs between the last and the first plane
    are omitted, leaving satellites in those two planes with 3 ISLs.
    """
    if orbits < 2 or sats_per_orbit < 3:
        raise TopologyError(f"need orbits >= 2 and sats_per_orbit >= 3, got {orbits}x{sats_per_orbit}")
    if altitude_km <= 0:
        raise TopologyError("altitude must be positive")
    c =Constellation(orbits, sats_per_orbit, altitude_km, inclination_deg, seam)
    n = c.num_sats
    src, dst, dirs = [-1], [-1], [""]
    index: dict[tuple[int, str], int] = {}
    for v in range(n):
        o, s = divmod(v, sats_per_orbit)
        for d in DIRECTIONS:
            do, ds = OFFSETS[d]
            if seam and do != 0 and not 0 <= o + do < orbits:
                continue
            w = c.sat(o + do, s + ds)
            index[(v, d)] = len(src)
            src.append(v)
            dst.append(w)
            dirs.append(d)
    rev = [0] * len(src)
    for (v, d), lid in index.items():
        rev[lid] = index[(dst[lid], OPPOSITE[d])]
    c.link_src, c.link_dst, c.link_dir, c.reverse = src, dst, dirs, rev
    outs: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    ins: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for lid in range(1, len(src)):
        outs[src[lid]].append((lid, dst[lid]))
        ins[dst[lid]].append((lid, src[lid]))
    c.out_links = [tuple(x) for x in outs]
    c.in_links = [tuple(x) for x in ins]
    c.reset_link_states()
    return c


def iridium() -> Constellation:
    return build(6, 11, 780.0)
