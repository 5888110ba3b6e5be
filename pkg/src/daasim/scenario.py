"""Traffic configuration generation, validation, and rotation deduplication.

A traffic configuration assigns each aircraft (ids 0..3) an origin and a
destination cell on the outer ring of the airspace. The generator enumerates
every assignment satisfying:

1. aircraft carry unique ids 0..3,
2. origin and destination are outer-ring (ring 2) cell centroids,
3. origins are pairwise distinct,
4. origin and destination are separated by at least the configured predicate.

The separation predicate (constraint 4) is deliberately pluggable because the
phrase "at least three cells in between" admits several readings. Three modes
are implemented; all restrict endpoints to ring 2:

* ``hex_grid_distance`` (default, threshold 4): lattice graph distance, i.e.
  at least three cells on every shortest hex path between the endpoints.
  This is the strictest reading that still leaves every outer cell with at
  least one legal destination, and the only one under which constraint 4
  alone forces endpoints onto the outer ring.
* ``ring_steps`` (threshold 4): steps between the two cells along the
  12-cell outer ring, with wraparound.
* ``euclidean_min`` (threshold in meters, default 12,000): centroid
  distance. Compared with a 1e-6 m guard so that thresholds landing exactly
  on lattice distances stay rotation-invariant despite floating-point noise.

Aircraft ids can be bound to origins two ways. ``ascending`` (default) emits
one configuration per origin *combination*, ids assigned in increasing origin
order; ``free`` emits all 24 labelings of each combination. Destinations are
not required to be distinct unless ``distinct_destinations`` is set.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .geometry import Airspace, hex_distance, ring, rotate_cell

GENERATOR_VERSION = "1"

Pair = tuple[int, int]
PairTuple = tuple[Pair, ...]


class ScenarioError(ValueError):
    """Raised for malformed generator inputs (bad mode, oversized sample)."""


@dataclass(frozen=True)
class SeparationPredicate:
    """Constraint-4 rule: symmetric legality of an (origin, destination) pair."""

    mode: str = "hex_grid_distance"
    threshold: float = 4.0

    _MODES = ("ring_steps", "hex_grid_distance", "euclidean_min")

    def __post_init__(self) -> None:
        if self.mode not in self._MODES:
            raise ScenarioError(f"unknown predicate mode {self.mode!r}; expected one of {self._MODES}")

    def separation(self, cell_a: int, cell_b: int, airspace: Airspace) -> float:
        """Mode-specific separation measure between two cells (symmetric)."""
        if self.mode == "ring_steps":
            d = abs((cell_a - 7) - (cell_b - 7)) % 12
            return float(min(d, 12 - d))
        if self.mode == "hex_grid_distance":
            return float(hex_distance(cell_a, cell_b))
        ax, ay = airspace.centroid(cell_a)
        bx, by = airspace.centroid(cell_b)
        return math.hypot(ax - bx, ay - by)

    def allows(self, origin: int, destination: int, airspace: Airspace) -> bool:
        if ring(origin) != 2 or ring(destination) != 2 or origin == destination:
            return False
        sep = self.separation(origin, destination, airspace)
        if self.mode == "euclidean_min":
            return sep >= self.threshold - 1e-6
        return sep >= self.threshold


@dataclass(frozen=True)
class MissionAssignment:
    aircraft_id: int
    origin: int
    destination: int


@dataclass(frozen=True)
class TrafficConfiguration:
    assignments: tuple[MissionAssignment, ...]

    def pairs(self) -> PairTuple:
        """(origin, destination) per aircraft, in aircraft-id order."""
        return tuple((a.origin, a.destination) for a in self.assignments)

    @staticmethod
    def from_pairs(pairs: Sequence[Pair]) -> "TrafficConfiguration":
        return TrafficConfiguration(
            tuple(MissionAssignment(i, o, d) for i, (o, d) in enumerate(pairs))
        )

    def config_hash(self) -> str:
        payload = ",".join(f"{a.aircraft_id}:{a.origin}:{a.destination}" for a in self.assignments)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class Violation:
    constraint: int
    aircraft: tuple[int, ...]
    message: str


def legal_destinations(
    predicate: SeparationPredicate | None, airspace: Airspace
) -> dict[int, tuple[int, ...]]:
    """Legal destination cells per outer-ring origin under the predicate.

    ``predicate=None`` disables constraint 4: any other outer cell is legal.
    """
    out: dict[int, tuple[int, ...]] = {}
    for o in range(7, 19):
        if predicate is None:
            out[o] = tuple(d for d in range(7, 19) if d != o)
        else:
            out[o] = tuple(d for d in range(7, 19) if predicate.allows(o, d, airspace))
    return out


def generate_pairs(
    airspace: Airspace,
    predicate: SeparationPredicate | None,
    *,
    id_assignment: str = "ascending",
    distinct_destinations: bool = False,
    n_aircraft: int = 4,
) -> list[PairTuple]:
    """Exhaustive, duplicate-free enumeration in lexicographic order.

    Tuple-level fast path used by the batch machinery; each element is the
    per-aircraft (origin, destination) tuple in aircraft-id order.
    """
    if id_assignment not in ("ascending", "free"):
        raise ScenarioError(f"unknown id_assignment {id_assignment!r}")
    if not 1 <= n_aircraft <= 4:
        raise ScenarioError(f"n_aircraft must be in [1, 4], got {n_aircraft}")
    dests = legal_destinations(predicate, airspace)
    if id_assignment == "ascending":
        origin_sets: Iterable[tuple[int, ...]] = itertools.combinations(range(7, 19), n_aircraft)
    else:
        origin_sets = itertools.permutations(range(7, 19), n_aircraft)
    out: list[PairTuple] = []
    for origins in origin_sets:
        pools = [dests[o] for o in origins]
        if any(not pool for pool in pools):
            continue
        for chosen in itertools.product(*pools):
            if distinct_destinations and len(set(chosen)) != n_aircraft:
                continue
            out.append(tuple(zip(origins, chosen)))
    # lexicographic by aircraft id, then origin, then destination
    out.sort()
    return out


def generate_configurations(
    airspace: Airspace,
    predicate: SeparationPredicate | None,
    **options,
) -> list[TrafficConfiguration]:
    """Exhaustive generation as configuration objects (see ``generate_pairs``)."""
    return [TrafficConfiguration.from_pairs(p) for p in generate_pairs(airspace, predicate, **options)]


def validate_configuration(
    cfg: TrafficConfiguration,
    predicate: SeparationPredicate | None,
    airspace: Airspace,
) -> list[Violation]:
    """Empty list iff all four generation constraints hold; one entry per breach."""
    violations: list[Violation] = []
    ids = [a.aircraft_id for a in cfg.assignments]
    if len(set(ids)) != len(ids) or any(not 0 <= i <= 3 for i in ids):
        violations.append(Violation(1, tuple(ids), "aircraft ids must be unique integers in [0, 3]"))
    for a in cfg.assignments:
        for label, cell in (("origin", a.origin), ("destination", a.destination)):
            try:
                r = ring(cell)
            except Exception:
                r = -1
            if r != 2:
                violations.append(
                    Violation(2, (a.aircraft_id,), f"aircraft {a.aircraft_id} {label} {cell} is not an outer-ring cell")
                )
        if a.origin == a.destination:
            violations.append(
                Violation(2, (a.aircraft_id,), f"aircraft {a.aircraft_id} origin equals destination")
            )
    seen: dict[int, int] = {}
    for a in cfg.assignments:
        if a.origin in seen:
            violations.append(
                Violation(3, (seen[a.origin], a.aircraft_id), f"origin {a.origin} shared by aircraft {seen[a.origin]} and {a.aircraft_id}")
            )
        else:
            seen[a.origin] = a.aircraft_id
    if predicate is not None:
        for a in cfg.assignments:
            if ring(a.origin) == 2 and ring(a.destination) == 2 and a.origin != a.destination:
                if not predicate.allows(a.origin, a.destination, airspace):
                    violations.append(
                        Violation(
                            4,
                            (a.aircraft_id,),
                            f"aircraft {a.aircraft_id} origin {a.origin} and destination {a.destination} "
                            f"violate {predicate.mode} >= {predicate.threshold}",
                        )
                    )
    return violations


# rotation lookup: _ROT[k][cell] is the cell rotated by k*60 degrees
_ROT = tuple(tuple(rotate_cell(c, k) for c in range(19)) for k in range(6))


def _rotate_pairs(pairs: PairTuple, k: int) -> PairTuple:
    rot = _ROT[k]
    return tuple((rot[o], rot[d]) for o, d in pairs)


def _legal_pair_set(
    predicate: SeparationPredicate | None, airspace: Airspace
) -> tuple[frozenset[Pair], bool]:
    """All legal outer-ring pairs, and whether the set is rotation-invariant."""
    legal = frozenset(
        (o, d)
        for o, dests in legal_destinations(predicate, airspace).items()
        for d in dests
    )
    rot1 = _ROT[1]
    invariant = all((rot1[o], rot1[d]) in legal for o, d in legal)
    return legal, invariant


def canonicalize_pairs(
    pairs: PairTuple,
    predicate: SeparationPredicate | None,
    airspace: Airspace,
    *,
    id_assignment: str = "ascending",
) -> PairTuple:
    """Lexicographically smallest valid member of the 6-rotation orbit.

    With ``ascending`` id binding, ids are re-bound to increasing origin order
    after each rotation (ids are positional, so the rotated mission set is
    re-canonicalized before comparison). With ``free`` binding ids stay
    attached to their missions. Rotations whose members break the predicate
    (possible only for rotation-asymmetric predicates) are skipped; k=0 always
    qualifies.
    """
    best: PairTuple | None = None
    for k in range(6):
        cand = _rotate_pairs(pairs, k)
        if id_assignment == "ascending":
            cand = tuple(sorted(cand))
        if predicate is not None and k != 0:
            if not all(predicate.allows(o, d, airspace) for o, d in cand):
                continue
        if best is None or cand < best:
            best = cand
    assert best is not None
    return best


def canonicalize_rotation(
    cfg: TrafficConfiguration,
    predicate: SeparationPredicate | None,
    airspace: Airspace,
    *,
    id_assignment: str = "ascending",
) -> TrafficConfiguration:
    return TrafficConfiguration.from_pairs(
        canonicalize_pairs(cfg.pairs(), predicate, airspace, id_assignment=id_assignment)
    )


def dedup_rotations(
    pairs_list: Sequence[PairTuple],
    predicate: SeparationPredicate | None,
    airspace: Airspace,
    *,
    id_assignment: str = "ascending",
) -> list[PairTuple]:
    """One representative (the canonical form) per rotation orbit, sorted.

    Semantics match mapping ``canonicalize_pairs`` over the set; the validity
    filter is skipped wholesale when the predicate is rotation-invariant,
    which all built-in modes are at lattice-exact thresholds.
    """
    legal, invariant = _legal_pair_set(predicate, airspace)
    ascending = id_assignment == "ascending"
    canon: set[PairTuple] = set()
    for pairs in pairs_list:
        best: PairTuple | None = None
        for k in range(6):
            rot = _ROT[k]
            cand = tuple((rot[o], rot[d]) for o, d in pairs)
            if ascending:
                cand = tuple(sorted(cand))
            if not invariant and k != 0 and not all(p in legal for p in cand):
                continue
            if best is None or cand < best:
                best = cand
        assert best is not None
        canon.add(best)
    return sorted(canon)


def sample_configurations(
    configurations: Sequence, n: int, seed: int
) -> list:
    """Uniform sample without replacement, reproducible from the seed."""
    if n > len(configurations):
        raise ScenarioError(f"sample size {n} exceeds set size {len(configurations)}")
    rng = random.Random(seed)
    return rng.sample(list(configurations), n)


# ---------------------------------------------------------------------------
# Scenario-set files: JSONL with a header record, plus a sha256 sidecar.
# ---------------------------------------------------------------------------


def scenario_set_header(
    airspace: Airspace,
    predicate: SeparationPredicate | None,
    *,
    id_assignment: str,
    distinct_destinations: bool,
    n_aircraft: int,
    count: int,
) -> dict:
    return {
        "record": "header",
        "generator_version": GENERATOR_VERSION,
        "predicate_mode": None if predicate is None else predicate.mode,
        "predicate_threshold": None if predicate is None else predicate.threshold,
        "id_assignment": id_assignment,
        "distinct_destinations": distinct_destinations,
        "n_aircraft": n_aircraft,
        "cell_radius_m": airspace.cell_radius,
        "count": count,
    }


def write_scenario_set(path: Path | str, pairs_list: Sequence[PairTuple], header: dict) -> str:
    """Write the set as line-delimited JSON; returns the sha256 of the bytes.

    The checksum is also written to ``<path>.sha256``.
    """
    path = Path(path)
    lines = [json.dumps(header, sort_keys=True)]
    for i, pairs in enumerate(pairs_list):
        lines.append(
            json.dumps(
                {
                    "record": "config",
                    "index": i,
                    "aircraft": [
                        {"aircraft_id": aid, "origin": o, "destination": d}
                        for aid, (o, d) in enumerate(pairs)
                    ],
                },
                sort_keys=True,
            )
        )
    blob = ("\n".join(lines) + "\n").encode()
    path.write_bytes(blob)
    checksum = hashlib.sha256(blob).hexdigest()
    Path(str(path) + ".sha256").write_text(checksum + "\n")
    return checksum


def read_scenario_set(path: Path | str) -> tuple[dict, list[PairTuple]]:
    """Parse a scenario-set file into (header, list of pair tuples)."""
    header: dict | None = None
    pairs_list: list[PairTuple] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("record") == "header":
                header = rec
            elif rec.get("record") == "config":
                pairs_list.append(
                    tuple((a["origin"], a["destination"]) for a in rec["aircraft"])
                )
    if header is None:
        raise ScenarioError(f"scenario set {path} has no header record")
    return header, pairs_list


def scenario_set_checksum(path: Path | str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# Interpretation survey: achieved cardinalities per documented reading of
# constraint 4, for the reproducibility report.
# ---------------------------------------------------------------------------

_SURVEY_PREDICATES = (
    SeparationPredicate("hex_grid_distance", 4),
    SeparationPredicate("ring_steps", 4),
    SeparationPredicate("euclidean_min", 12000.0),
)


def interpretation_survey(airspace: Airspace | None = None) -> list[dict]:
    """Counts and rotation-dedup counts per documented interpretation.

    Enumerates the ascending-id sets; free-id figures follow analytically
    (each origin combination admits 24 labelings, and labeled rotation orbits
    all have size 6 for these rotation-invariant predicates).
    """
    airspace = airspace or Airspace()
    rows: list[dict] = []
    for predicate in _SURVEY_PREDICATES:
        for distinct in (False, True):
            pairs = generate_pairs(
                airspace, predicate, id_assignment="ascending", distinct_destinations=distinct
            )
            deduped = dedup_rotations(pairs, predicate, airspace, id_assignment="ascending")
            rows.append(
                {
                    "predicate_mode": predicate.mode,
                    "predicate_threshold": predicate.threshold,
                    "distinct_destinations": distinct,
                    "count_ascending": len(pairs),
                    "dedup_ascending": len(deduped),
                    "count_free": 24 * len(pairs),
                    "dedup_free": 4 * len(pairs),
                }
            )
    return rows
