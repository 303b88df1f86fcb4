"""Array form of n scenes that share a map, an ego template and an agent roster."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List

import numpy as np

from app.schemas.world import AgentKind, AgentState, EgoState, MapContext, WorldState
from app.services.geometry import normalize_heading, wrap_angles


@dataclass(frozen=True)
class SceneBatch:
    time: float
    map: MapContext
    ego_template: EgoState
    agent_ids: List[str]
    kinds: List[AgentKind]
    position: np.ndarray       # (n, k, 2)
    heading: np.ndarray        # (n, k)
    speed: np.ndarray          # (n, k)
    extent: np.ndarray         # (n, k, 2)
    ego_position: np.ndarray   # (n, 2)
    ego_heading: np.ndarray    # (n,)
    ego_speed: np.ndarray      # (n,)

    @property
    def n(self) -> int:
        return int(self.ego_position.shape[0])

    @property
    def k(self) -> int:
        return len(self.agent_ids)

    @property
    def ego_extent(self) -> np.ndarray:
        return np.asarray(self.ego_template.extent, dtype=float)

    @classmethod
    def from_world(cls, world: WorldState, n: int) -> SceneBatch:
        """Replicate one scene n times"""
        k = len(world.agents)
        position = np.array([a.position for a in world.agents], dtype=float).reshape(k, 2)
        heading = np.array([a.heading for a in world.agents], dtype=float)
        speed = np.array([a.speed for a in world.agents], dtype=float)
        extent = np.array([a.extent for a in world.agents], dtype=float).reshape(k, 2)
        return cls(
            time=world.time,
            map=world.map,
            ego_template=world.ego,
            agent_ids=[a.id for a in world.agents],
            kinds=[a.kind for a in world.agents],
            position=np.broadcast_to(position, (n, k, 2)).copy(),
            heading=np.broadcast_to(heading, (n, k)).copy(),
            speed=np.broadcast_to(speed, (n, k)).copy(),
            extent=np.broadcast_to(extent, (n, k, 2)).copy(),
            ego_position=np.broadcast_to(np.asarray(world.ego.position, dtype=float), (n, 2)).copy(),
            ego_heading=np.full(n, world.ego.heading, dtype=float),
            ego_speed=np.full(n, world.ego.speed, dtype=float),
        )

    def index_of(self, agent_id: str) -> int:
        try:
            return self.agent_ids.index(agent_id)
        except ValueError:
            raise KeyError(agent_id) from None

    def without_agent(self, agent_id: str) -> SceneBatch:
        j = self.index_of(agent_id)
        keep = [i for i in range(self.k) if i != j]
        return replace(
            self,
            agent_ids=[self.agent_ids[i] for i in keep],
            kinds=[self.kinds[i] for i in keep],
            position=self.position[:, keep],
            heading=self.heading[:, keep],
            speed=self.speed[:, keep],
            extent=self.extent[:, keep],
        )

    def with_agent(self, agent_id: str, kind: AgentKind, position: np.ndarray, heading: np.ndarray,
                   speed: np.ndarray, extent: np.ndarray) -> SceneBatch:
        """Append an agent given per-sample position (n, 2), heading (n,), speed (n,), extent (n, 2)"""
        return replace(
            self,
            agent_ids=self.agent_ids + [agent_id],
            kinds=self.kinds + [kind],
            position=np.concatenate([self.position, position[:, None, :]], axis=1),
            heading=np.concatenate([self.heading, wrap_angles(heading)[:, None]], axis=1),
            speed=np.concatenate([self.speed, speed[:, None]], axis=1),
            extent=np.concatenate([self.extent, extent[:, None, :]], axis=1),
        )

    def scene(self, i: int) -> WorldState:
        """The i-th scene as a WorldState"""
        agents = [
            AgentState(
                id=agent_id,
                kind=self.kinds[j],
                position=(float(self.position[i, j, 0]), float(self.position[i, j, 1])),
                heading=float(self.heading[i, j]),
                speed=float(self.speed[i, j]),
                extent=(float(self.extent[i, j, 0]), float(self.extent[i, j, 1])),
            )
            for j, agent_id in enumerate(self.agent_ids)
        ]
        ego = self.ego_template.model_copy(update={
            "position": (float(self.ego_position[i, 0]), float(self.ego_position[i, 1])),
            "heading": normalize_heading(float(self.ego_heading[i])),
            "speed": float(self.ego_speed[i]),
        })
        return WorldState(time=self.time, ego=ego, agents=agents, map=self.map)


@dataclass(frozen=True)
class Rollout:
    """
    Predicted futures of a SceneBatch over T steps.

    Leading axes are (step, sample); agent arrays add an agent axis. Agent
    extents do not change along a rollout.
    """
    batch: SceneBatch
    dt: float
    ego_position: np.ndarray   # (T, n, 2)
    ego_heading: np.ndarray    # (T, n)
    ego_speed: np.ndarray      # (T, n)
    position: np.ndarray       # (T, n, k, 2)
    heading: np.ndarray        # (T, n, k)
    speed: np.ndarray          # (T, n, k)

    @property
    def steps(self) -> int:
        return int(self.ego_position.shape[0])

    @property
    def n(self) -> int:
        return self.batch.n

    def at(self, tau: int) -> SceneBatch:
        """Batch of predicted scenes tau steps ahead (1-based)"""
        t = tau - 1
        return replace(
            self.batch,
            time=self.batch.time + tau * self.dt,
            position=self.position[t],
            heading=self.heading[t],
            speed=self.speed[t],
            ego_position=self.ego_position[t],
            ego_heading=self.ego_heading[t],
            ego_speed=self.ego_speed[t],
        )

    def worlds(self, i: int) -> List[WorldState]:
        """Sample i as a list of T predicted world states"""
        return [self.at(tau).scene(i) for tau in range(1, self.steps + 1)]
