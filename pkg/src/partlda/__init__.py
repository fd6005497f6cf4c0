"""Load-balanced P x P partitioning for parallel collapsed Gibbs sampling."""

__version__ = "0.1.0"

from partlda.corpus import Corpus, TimestampTable, generate_synthetic, load_timestamps, load_uci_bow
from partlda.partitioner import PartitionerConfig, oracle_optimal, partition
from partlda.sampler import GibbsState, ModelConfig, train
from partlda.scheduler import DiagonalSchedule, build_schedule, verify_nonconflicting
from partlda.workload import BalanceReport, Partitioning, WorkloadMatrix, balance_report, build_workload

__all__ = [
    "BalanceReport",
    "Corpus",
    "DiagonalSchedule",
    "GibbsState",
    "ModelConfig",
    "PartitionerConfig",
    "Partitioning",
    "TimestampTable",
    "WorkloadMatrix",
    "balance_report",
    "build_schedule",
    "build_workload",
    "generate_synthetic",
    "load_timestamps",
    "load_uci_bow",
    "oracle_optimal",
    "partition",
    "train",
    "verify_nonconflicting",
]
