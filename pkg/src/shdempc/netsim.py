"""Synchronous in-process message bus with round barriers."""

from __future__ import annotations

import threading
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np


class BusConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class Message:
    sender: int
    payload: Any
    round: int


@dataclass
class BusStats:
    messages_sent: int = 0
    messages_delivered: int = 0
    rounds: int = 0
    bytes_estimate: int = 0


def payload_bytes(payload) -> int:
    """Size estimate assuming 8-byte reals for every array field."""
    total = 0
    for value in vars(payload).values() if hasattr(payload, "__dict__") else ():
        if isinstance(value, np.ndarray):
            total += 8 * value.size
    return total


class MessageBus:
    """Messages broadcast during round ``r`` become readable only after ``barrier()``.

    Inbox order is by sender id, then send order, independent of the order
    in which agents happened to broadcast.
    """

    def __init__(self, agent_ids: Iterable[int]):
        self.agents = frozenset(agent_ids)
        self.stats = BusStats()
        self._pending: list[tuple[int, int, Message]] = []
        self._inbox: dict[int, list[Message]] = defaultdict(list)
        self._seq = 0
        self._lock = threading.Lock()

    def broadcast(self, sender: int, payload, recipients: Iterable[int]) -> int:
        recipients = sorted(set(recipients))
        if sender not in self.agents:
            raise BusConfigurationError(f"unknown sender {sender}")
        unknown = [r for r in recipients if r not in self.agents]
        if unknown:
            raise BusConfigurationError(f"unknown recipients {unknown}")
        if sender in recipients:
            raise BusConfigurationError(f"agent {sender} cannot message itself")
        if not recipients:
            return 0
        size = payload_bytes(payload)
        with self._lock:
            msg = Message(sender, payload, self.stats.rounds)
            for r in recipients:
                self._pending.append((r, self._seq, msg))
                self._seq += 1
            self.stats.messages_sent += len(recipients)
            self.stats.bytes_estimate += size * len(recipients)
        return len(recipients)

    def barrier(self) -> int:
        with self._lock:
            pending = sorted(self._pending, key=lambda t: (t[0], t[2].sender, t[1]))
            self._pending = []
            for recipient, _, msg in pending:
                self._inbox[recipient].append(msg)
            self.stats.rounds += 1
            self.stats.messages_delivered += len(pending)
            return len(pending)

    def receive(self, agent: int) -> list[Message]:
        """Drain the agent's delivered messages."""
        with self._lock:
            return self._inbox.pop(agent, [])

    def pending(self) -> int:
        return len(self._pending)
