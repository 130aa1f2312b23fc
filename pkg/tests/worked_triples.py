"""The three hand-checked amalgamation problems over a single point."""

from forge.dsl import parse_theory
from forge.logic import FiniteStructure, Signature, graph
from forge.theory import AgeOracle, pithy_expand

GRAPH = "rel E/2\nforall x y: E(x,y) -> E(y,x)\nforall x: ~E(x,x)\n"
TRIANGLE_FREE = GRAPH + "forbid 3: E(0,1) E(1,0) E(1,2) E(2,1) E(0,2) E(2,0)\n"
DEGREE_ONE = GRAPH + "forall x y z: E(x,y) & E(x,z) -> y = z\n"
LINEAR = ("rel L/2\nforall x: ~L(x,x)\nforall x y z: L(x,y) & L(y,z) -> L(x,z)\n"
          "forall x y: x = y | L(x,y) | L(y,x)\n")


def oracle(source: str) -> AgeOracle:
    return AgeOracle(pithy_expand(parse_theory(source)))


def _order(n, pairs):
    return FiniteStructure(Signature((("L", 2),)), n, {"L": set(pairs)})


POINT_GRAPH = graph(1, [])
EDGE = graph(2, [(0, 1)])          # a = 0, other endpoint 1
POINT_ORDER = _order(1, [])
ABOVE = _order(2, [(0, 1)])        # a < b
BELOW = _order(2, [(1, 0)])        # c < a

# name -> (oracle source, A, B, C, f, g, expected verdict)
TRIPLES = {
    "triangle-free": (TRIANGLE_FREE, POINT_GRAPH, EDGE, EDGE, (0,), (0,), True),
    "degree<=1": (DEGREE_ONE, POINT_GRAPH, EDGE, EDGE, (0,), (0,), False),
    "linear orders": (LINEAR, POINT_ORDER, ABOVE, BELOW, (0,), (0,), True),
}
