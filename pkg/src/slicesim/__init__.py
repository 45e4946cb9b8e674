"""Weather-aware slice admission simulator for a single mmWave backhaul link."""

__version__ = "0.1.0"
