"""Formation-aware decentralized trajectory planning for quadrotor swarms."""

__version__ = "0.1.0"
