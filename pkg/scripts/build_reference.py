"""Build src/cife/data/reference_results.json from the LaTeX tables in paper.md."""
import json
import re
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
text = (ROOT / "paper.md").read_text()


def cells(line):
    line = line.split("\\\\")[0]
    out = []
    for c in line.split("&"):
        c = re.sub(r"\\bet(Pruning)?\{([^}]*)\}", r"\2", c)
        c = c.replace("{", "").replace("}", "").strip()
        out.append(c)
    return out


def block(label):
    i = text.index("\\label{" + label)
    start = text.rfind("\\begin{table", 0, i)
    end = text.index("\\end{table", i)
    return text[start:end]


# -- method comparison
methods = ["AGOB", "Bagging", "DivP", "DREP", "GASEN", "Kappa", "POBE", "MTD-UMDA", "PTP-UMDA"]
comparison = {m: {} for m in methods}
sizes = {m: {} for m in methods}
wtl = {}
for line in block("tab:approachesMultiplos").splitlines():
    c = cells(line)
    if len(c) != 19:
        continue
    name = c[0].replace("\\textbf", "").strip()
    if name.startswith("Datasets"):
        continue
    if name == "Average of classifiers":
        for k, m in enumerate(methods):
            sizes[m]["_average"] = int(c[2 + 2 * k])
        continue
    if name == "Win/Tie/Loss":
        for k, m in enumerate(methods):
            wtl[m] = [int(x) for x in c[1 + 2 * k].split("/")]
        continue
    for k, m in enumerate(methods):
        comparison[m][name] = float(c[1 + 2 * k])
        sizes[m][name] = int(c[2 + 2 * k])

# -- pool-size medians
pool = {}
for line in block("table:conjuntoDadosPool").splitlines():
    c = cells(line)
    if len(c) == 6 and re.match(r"^\d+\.\d+$", c[1]):
        pool[c[0]] = dict(zip(["50", "100", "150", "200", "250"], map(float, c[1:])))

# -- significance
pvalues = {}
for line in block("tab:testEstatisticoMultiplos").splitlines():
    m = re.match(r"MTD-UMDA \$ \\times\$ (\S+)\s*&\s*([0-9.]+)", line.strip())
    if m:
        pvalues[m.group(1)] = float(m.group(2))

# -- timing
timing = {}
for line in block("tab:time").splitlines():
    c = cells(line)
    if len(c) == 4 and re.match(r"^\d", c[1]) and "Average" not in c[0]:
        timing[c[0]] = {"PTP-UMDA": float(c[1]), "MTD-UMDA": float(c[2]), "ratio": float(c[3])}

out = {
    "description": "Published median test accuracies (percent), ensemble sizes, win/tie/loss, "
    "Wilcoxon p-values against MTD-UMDA, pool-size medians and PTP/MTD timing.",
    "accuracy": comparison,
    "ensemble_size": sizes,
    "win_tie_loss": wtl,
    "wilcoxon_vs_mtd_umda": pvalues,
    "pool_size_median": pool,
    "timing_seconds": timing,
}
dest = ROOT / "src" / "cife" / "data" / "reference_results.json"
dest.write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
print(len(comparison["AGOB"]), len(pool), len(pvalues), len(timing), wtl)
