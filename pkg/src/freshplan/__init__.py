"""Decision engine for fresh-produce retail: solar-term-aware cost forecasting,
bootstrap sales intervals, entropy-TOPSIS product ranking, and GA price/allocation
optimization."""

__version__ = "0.1.0"
