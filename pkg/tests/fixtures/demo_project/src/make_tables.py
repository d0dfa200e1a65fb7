"""Render the results table for the paper."""
import json

with open("out/summary.json") as fh:
    rows = json.load(fh)
with open("out/table.tex", "w") as fh:
    fh.write("\\begin{tabular}{rrrr}\n\\toprule\nInstance & Edges & E[cut] & Best \\\\\n\\midrule\n")
    for r in rows:
        fh.write(f"{r['id']} & {r['edges']} & {r['expected_cut']:.3f} & {r['best_cut']} \\\\\n")
    fh.write("\\bottomrule\n\\end{tabular}\n")
