"""
Garden-hose gadget description: EPR pairs between numbered sockets, one
P-twisted link and, per routing bit, the Bell measurements that carry the
input socket to the output socket.
"""

from typing import Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.exceptions import GadgetError

HEADER = "GH v1"


class GardenHoseSpec(BaseModel):
    """
    Socket 0 is the input end and socket ``2 * pair_count - 1`` the output end.

    ``routes[b]`` lists Bell measurements (u, v): u holds the travelling state,
    v is the socket it is teleported through; the state continues at the
    partner of v.
    """

    model_config = ConfigDict(frozen=True)

    pair_count: int = Field(ge=1)
    links: tuple[tuple[int, int], ...]
    p_link: int
    routes: dict[int, tuple[tuple[int, int], ...]]

    @model_validator(mode="after")
    def _check(self) -> "GardenHoseSpec":
        sockets = [s for link in self.links for s in link]
        if sorted(sockets) != list(range(2 * self.pair_count)):
            raise ValueError("every socket must appear in exactly one link")
        if len(self.links) != self.pair_count:
            raise ValueError("one link per EPR pair")
        if not 0 <= self.p_link < len(self.links):
            raise ValueError("p_link does not name a link")
        if set(self.routes) != {0, 1}:
            raise ValueError("routes must be given for b = 0 and b = 1")
        for b in (0, 1):
            if self.p_crossings(b) % 2 != b:
                raise ValueError(f"route {b} crosses the P link the wrong number of times")
        return self

    @property
    def in_socket(self) -> int:
        return 0

    @property
    def out_socket(self) -> int:
        return 2 * self.pair_count - 1

    def partner(self, socket: int) -> tuple[int, int]:
        """(partner socket, link index)."""
        for index, (a, b) in enumerate(self.links):
            if socket == a:
                return b, index
            if socket == b:
                return a, index
        raise ValueError(f"socket {socket} is not linked")

    def path(self, b: int) -> list[tuple[int, bool]]:
        """Sockets the state visits on route b, each with whether the link into it carries P."""
        current, link = self.partner(self.in_socket)
        visited = [(current, link == self.p_link)]
        for u, v in self.routes[b]:
            if u != current:
                raise ValueError(f"route {b} measures socket {u} while the state sits at {current}")
            current, link = self.partner(v)
            visited.append((current, link == self.p_link))
        if current != self.out_socket:
            raise ValueError(f"route {b} ends at socket {current}, not at the output")
        return visited

    def p_crossings(self, b: int) -> int:
        return sum(1 for _, twisted in self.path(b) if twisted)

    def trace_route(self, b: int, a1: int, a2: int, outcomes: Sequence[int]) -> tuple[int, int]:
        """
        Pauli frame (x, z) on the output socket after route b.

        Args:
            b: Route taken
            a1, a2: Outcomes of the Bell measurement into the input socket
            outcomes: (a, b) per Bell measurement of the route

        Returns:
            Exponents of the X^x Z^z left on the output relative to P^b of the input
        """
        route = self.routes[b]
        if len(outcomes) != 2 * len(route):
            raise GadgetError(f"route {b} needs {2 * len(route)} outcome bits, got {len(outcomes)}")
        steps = self.path(b)
        fx, fz = a1 & 1, a2 & 1
        if steps[0][1]:
            fz ^= fx
        for k, (_, twisted) in enumerate(steps[1:]):
            fx ^= outcomes[2 * k] & 1
            fz ^= outcomes[2 * k + 1] & 1
            if twisted:
                fz ^= fx
        return fx, fz

    def to_text(self) -> str:
        lines = [HEADER, f"pair {self.pair_count}"]
        for index, (a, b) in enumerate(self.links):
            lines.append(f"link {a} {b}" + (" P" if index == self.p_link else ""))
        for bit in (0, 1):
            hops = " ".join(f"{u}-{v}" for u, v in self.routes[bit])
            lines.append(f"route {bit}: {hops}".rstrip())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GardenHoseSpec":
        lines = text.splitlines()
        if not lines or lines[0] != HEADER:
            raise GadgetError("missing garden-hose header")
        pair_count, links, p_link, routes = 0, [], -1, {}
        try:
            for line in lines[1:]:
                parts = line.split()
                if parts[0] == "pair":
                    pair_count = int(parts[1])
                elif parts[0] == "link":
                    if len(parts) == 4 and parts[3] == "P":
                        p_link = len(links)
                    elif len(parts) != 3:
                        raise ValueError(f"bad link line {line!r}")
                    links.append((int(parts[1]), int(parts[2])))
                elif parts[0] == "route":
                    bit = int(parts[1].rstrip(":"))
                    routes[bit] = tuple(tuple(int(s) for s in hop.split("-")) for hop in parts[2:])
                else:
                    raise ValueError(f"unknown line {line!r}")
            spec = cls(pair_count=pair_count, links=tuple(links), p_link=p_link, routes=routes)
        except (ValueError, IndexError) as e:
            raise GadgetError(f"malformed garden-hose description: {e}") from e
        if spec.to_text() != text:
            raise GadgetError("garden-hose description is not canonical")
        return spec
