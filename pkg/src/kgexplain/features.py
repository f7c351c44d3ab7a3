"""Graph features: neighbors, paths and path patterns.

Features are stored by IRI so they survive export and reload independently
of any graph's integer ids. The textual descriptor is the canonical,
unique form used for ordering and matrix headers::

    [http://x/n]                                   neighbor
    ->http://x/p1 [http://x/n1] ->http://x/p2 [T]   path pattern
    <-http://x/p [C:http://x/C]                      inverse step (undirected mining)
"""

from __future__ import annotations

from dataclasses import dataclass

NODE, CLASS, TOP_KIND = "node", "class", "top"
NEIGHBOR, PATH, PATTERN = "neighbor", "path", "pattern"


@dataclass(frozen=True)
class Element:
    kind: str
    iri: str | None = None

    def __post_init__(self):
        if self.kind not in (NODE, CLASS, TOP_KIND):
            raise ValueError(f"bad element kind {self.kind!r}")
        if (self.kind == TOP_KIND) != (self.iri is None):
            raise ValueError("top carries no IRI; nodes and classes need one")

    @property
    def descriptor(self) -> str:
        if self.kind == TOP_KIND:
            return "[T]"
        if self.kind == CLASS:
            return f"[C:{self.iri}]"
        return f"[{self.iri}]"


TOP_ELEMENT = Element(TOP_KIND)


@dataclass(frozen=True)
class Step:
    predicate: str
    element: Element
    inverse: bool = False

    @property
    def descriptor(self) -> str:
        arrow = "<-" if self.inverse else "->"
        return f"{arrow}{self.predicate} {self.element.descriptor}"


@dataclass(frozen=True)
class Feature:
    kind: str
    steps: tuple[Step, ...] = ()
    node: str | None = None

    def __post_init__(self):
        if self.kind == NEIGHBOR:
            if self.node is None or self.steps:
                raise ValueError("a neighbor feature has a node and no steps")
        elif self.kind in (PATH, PATTERN):
            if not self.steps or self.node is not None:
                raise ValueError("a path feature has steps and no node")
            all_nodes = all(s.element.kind == NODE for s in self.steps)
            if all_nodes != (self.kind == PATH):
                raise ValueError("a pattern needs at least one class or top element; a path has none")
        else:
            raise ValueError(f"bad feature kind {self.kind!r}")

    @classmethod
    def neighbor(cls, iri: str) -> "Feature":
        return cls(NEIGHBOR, node=iri)

    @classmethod
    def from_steps(cls, steps) -> "Feature":
        steps = tuple(steps)
        kind = PATH if all(s.element.kind == NODE for s in steps) else PATTERN
        return cls(kind, steps)

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def descriptor(self) -> str:
        if self.kind == NEIGHBOR:
            return f"[{self.node}]"
        return " ".join(s.descriptor for s in self.steps)

    def elements(self) -> list[Element]:
        if self.kind == NEIGHBOR:
            return [Element(NODE, self.node)]
        return [s.element for s in self.steps]

    def terminus(self) -> Element:
        return self.elements()[-1]

    def to_record(self) -> dict:
        rec: dict = {"descriptor": self.descriptor, "kind": self.kind}
        if self.kind == NEIGHBOR:
            rec["node"] = self.node
        else:
            rec["steps"] = [
                {"predicate": s.predicate, "inverse": s.inverse,
                 "element": {"kind": s.element.kind, "iri": s.element.iri}}
                for s in self.steps
            ]
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Feature":
        if rec["kind"] == NEIGHBOR:
            f = cls.neighbor(rec["node"])
        else:
            f = cls(rec["kind"], tuple(
                Step(s["predicate"], Element(s["element"]["kind"], s["element"].get("iri")), bool(s.get("inverse", False)))
                for s in rec["steps"]
            ))
        if "descriptor" in rec and rec["descriptor"] != f.descriptor:
            raise ValueError(f"descriptor mismatch for {rec['descriptor']!r}")
        return f

    def __str__(self) -> str:
        return self.descriptor
