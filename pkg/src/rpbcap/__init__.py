"""rpbcap: rotating packed bed CO2 capture simulation, design and costing."""

__version__ = "0.1.0"
