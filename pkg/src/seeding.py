"""
Per-replica random streams derived from a master seed
"""
from typing import Callable, List, Sequence

import numpy as np
from joblib import Parallel, delayed


def replica_seeds(master_seed: int, count: int) -> List[np.random.SeedSequence]:
    """
    Spawn one child SeedSequence per replica index

    Args:
        master_seed: Master seed of the experiment
        count: Number of replicas

    Returns:
        List of child seed sequences, indexed by replica
    """
    if count < 0:
        raise ValueError(f"Replica count must be non-negative, got {count}")
    return np.random.SeedSequence(int(master_seed)).spawn(count)


def replica_rngs(master_seed: int, count: int) -> List[np.random.Generator]:
    """Independent generators, one per replica index"""
    return [np.random.default_rng(seq) for seq in replica_seeds(master_seed, count)]


def run_replicas(func: Callable, tasks: Sequence[tuple], master_seed: int, workers: int = 1) -> List:
    """
    Run func(*task, rng) for every task, one seeded generator per task index

    Results come back in task order whatever the number of workers.

    Args:
        func: Picklable callable taking the task arguments followed by a Generator
        tasks: Argument tuples
        master_seed: Master seed of the experiment
        workers: joblib worker count (1 runs in-process)

    Returns:
        List of results aligned with tasks
    """
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")
    seeds = replica_seeds(master_seed, len(tasks))
    jobs = (delayed(func)(*task, np.random.default_rng(seq)) for task, seq in zip(tasks, seeds))
    return Parallel(n_jobs=workers)(jobs)
