"""O(1) bitmap scheduler: two priority arrays selected through a swap bit.

Level 0 is the highest priority. Round-robin inside a level is plain
dequeue-at-head / enqueue-at-tail, so no per-level cursor is kept. The same
PriorityArray backs the softirq tasklet queue.
"""
from dataclasses import dataclass, replace

from .errors import ModelAssertionError

LEVELS = 32

# Logical array selectors; the physical array is resolved through the swap bit.
ACTIVE = 0
EXPIRED = 1

_EMPTY_QUEUES: tuple[tuple[int, ...], ...] = ((),) * LEVELS


@dataclass(frozen=True, slots=True)
class PriorityArray:
    bitmap: int = 0
    queues: tuple[tuple[int, ...], ...] = _EMPTY_QUEUES

    def __contains__(self, pid: int) -> bool:
        bitmap = self.bitmap
        while bitmap:
            level = (bitmap & -bitmap).bit_length() - 1
            if pid in self.queues[level]:
                return True
            bitmap &= bitmap - 1
        return False

    def __len__(self) -> int:
        return sum(len(q) for q in self.queues)

    def is_consistent(self) -> bool:
        """Bitmap bit L is set exactly when queue L is non-empty."""
        return all(bool(self.bitmap >> level & 1) == bool(q) for level, q in enumerate(self.queues))

    def pids(self) -> list[int]:
        return [pid for q in self.queues for pid in q]


@dataclass(frozen=True, slots=True)
class RunQueueSet:
    arrays: tuple[PriorityArray, PriorityArray] = (PriorityArray(), PriorityArray())
    swap_bit: int = 0

    def physical(self, which: int) -> int:
        # ACTIVE = (0 | swap), EXPIRED = (1 ^ swap)
        return (0 | self.swap_bit) if which == ACTIVE else (1 ^ self.swap_bit)

    def view(self, which: int) -> PriorityArray:
        return self.arrays[self.physical(which)]

    def __contains__(self, pid: int) -> bool:
        return pid in self.arrays[0] or pid in self.arrays[1]


def array_push(array: PriorityArray, pid: int, level: int, capacity: int) -> PriorityArray:
    if not 0 <= level < LEVELS:
        raise ModelAssertionError("queue_bounds", f"level {level} outside 0..{LEVELS - 1}")
    queue = array.queues[level]
    if pid in array:
        raise ModelAssertionError("queue_bounds", f"pid {pid} already queued")
    if len(queue) >= capacity:
        raise ModelAssertionError("queue_bounds", f"level {level} queue full ({capacity})")
    queues = array.queues[:level] + (queue + (pid,),) + array.queues[level + 1:]
    return PriorityArray(array.bitmap | (1 << level), queues)


def array_pop_highest(array: PriorityArray) -> tuple[PriorityArray, int | None]:
    if not array.bitmap:
        if any(array.queues):
            raise ModelAssertionError("bitmap_consistency", "empty bitmap over a non-empty queue")
        return array, None
    level = (array.bitmap & -array.bitmap).bit_length() - 1
    queue = array.queues[level]
    if not queue:
        raise ModelAssertionError("bitmap_consistency", f"bit {level} set over an empty queue")
    rest = queue[1:]
    bitmap = array.bitmap if rest else array.bitmap & ~(1 << level)
    queues = array.queues[:level] + (rest,) + array.queues[level + 1:]
    return PriorityArray(bitmap, queues), queue[0]


def enqueue(rq: RunQueueSet, which: int, pid: int, level: int, capacity: int) -> RunQueueSet:
    """Append pid at the tail of its level in the (swap-resolved) array."""
    if pid in rq:
        raise ModelAssertionError("queue_bounds", f"pid {pid} already in a runqueue")
    index = rq.physical(which)
    arrays = list(rq.arrays)
    arrays[index] = array_push(arrays[index], pid, level, capacity)
    return replace(rq, arrays=(arrays[0], arrays[1]))


def dequeue_highest(rq: RunQueueSet, which: int) -> tuple[RunQueueSet, int | None]:
    index = rq.physical(which)
    array, pid = array_pop_highest(rq.arrays[index])
    if pid is None:
        return rq, None
    arrays = list(rq.arrays)
    arrays[index] = array
    return replace(rq, arrays=(arrays[0], arrays[1])), pid


def swap(rq: RunQueueSet) -> RunQueueSet:
    return replace(rq, swap_bit=rq.swap_bit ^ 1)


def sched_elect(rq: RunQueueSet) -> tuple[RunQueueSet, int | None]:
    """Pick the next thread; None means idle."""
    rq, pid = dequeue_highest(rq, ACTIVE)
    if pid is not None:
        return rq, pid
    rq = swap(rq)
    return dequeue_highest(rq, ACTIVE)


# Tasklet queue: a single PriorityArray of bottom-half owners.

def tasklet_schedule(tasklets: PriorityArray, pid: int, level: int, capacity: int) -> PriorityArray:
    """Queue a bottom half; scheduling an already queued one is a no-op."""
    if pid in tasklets:
        return tasklets
    return array_push(tasklets, pid, level, capacity)


def tasklet_pop(tasklets: PriorityArray) -> tuple[PriorityArray, int | None]:
    return array_pop_highest(tasklets)
