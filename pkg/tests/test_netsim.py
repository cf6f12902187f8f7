import threading

import numpy as np
import pytest

import oracles
from shdempc.netsim import BusConfigurationError, MessageBus
from shdempc.topology import chain


def test_empty_broadcast():
    bus = MessageBus(range(3))
    assert bus.broadcast(0, "x", []) == 0
    assert bus.stats.messages_sent == 0


def test_full_round_on_chain():
    g = chain(10)
    bus = MessageBus(range(10))
    for i in range(10):
        bus.broadcast(i, i, g.downstream[i])
    assert bus.barrier() == 18 == oracles.count_chain_messages(10)
    assert [m.sender for m in bus.receive(4)] == [3, 5]


def test_self_message_rejected():
    bus = MessageBus(range(3))
    with pytest.raises(BusConfigurationError):
        bus.broadcast(1, "x", [1, 2])
    with pytest.raises(BusConfigurationError):
        bus.broadcast(1, "x", [7])
    with pytest.raises(BusConfigurationError):
        bus.broadcast(9, "x", [0])


def test_barrier_counts():
    bus = MessageBus(range(3))
    assert bus.barrier() == 0
    bus.broadcast(0, "x", [1, 2])
    assert bus.pending() == 2
    assert bus.receive(1) == []  # nothing visible before the barrier
    assert bus.barrier() == 2
    assert bus.barrier() == 0


def test_inbox_order_independent_of_send_order():
    orders = [[2, 0, 1], [0, 1, 2], [1, 2, 0]]
    seen = []
    for order in orders:
        bus = MessageBus(range(4))
        for s in order:
            bus.broadcast(s, f"from{s}", [3])
        bus.barrier()
        seen.append([m.payload for m in bus.receive(3)])
    assert seen[0] == seen[1] == seen[2] == ["from0", "from1", "from2"]


def test_concurrent_broadcasts_are_all_delivered():
    bus = MessageBus(range(20))
    threads = [threading.Thread(target=bus.broadcast, args=(i, np.zeros(3), [(i + 1) % 20]))
               for i in range(20)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert bus.barrier() == 20
    assert all(len(bus.receive(i)) == 1 for i in range(20))
