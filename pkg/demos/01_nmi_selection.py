"""
Ranking candidate inputs by normalized mutual information
==========================================================

A simulated office sensor log (temperature, humidity, light, CO2, humidity
ratio, occupancy) is binned into symbols, and every pair of columns gets a
dependency score.  The candidate with the highest score against temperature
becomes the model input.
"""

import os

from nmiarmax.pipeline import load_config, run_selection

HERE = os.path.dirname(os.path.abspath(__file__))
config = load_config(os.path.join(HERE, os.pardir, "fixtures", "office", "config.json"))

# %%
# Scores are computed on the training rows only, so the test sets never
# influence which inputs are chosen.
report = run_selection(config)
print(report.matrix.format_grid())

# %%
# The ranking against the output column, best first.
for name, value in report.ranking:
    print(f"{name:<15}{value:.4f}")
print("selected:", ", ".join(report.selected))

# %%
# A threshold rule keeps every input scoring at least tau instead.
from dataclasses import replace
from nmiarmax.pipeline import SelectionRule

for tau in (0.5, 0.3, 0.1):
    sel = run_selection(replace(config, selection=SelectionRule("threshold", tau=tau)))
    print(f"tau={tau}: {', '.join(sel.selected)}")
