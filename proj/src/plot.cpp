#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "nadd/experiments.hpp"

namespace nadd {

namespace fs = std::filesystem;

namespace {

// Generic renderer; the emitter only fills in the experiment kind and file names.
constexpr const char* kScript = R"PY(#!/usr/bin/env python3
"""Render the figures for one nadd run directory (written by `nadd plot`)."""
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
KIND = "@KIND@"
FILES = @FILES@


def rows(name):
    path = os.path.join(HERE, name)
    if not os.path.exists(path):
        sys.exit(f"missing data file {name}")
    with open(path, newline="") as f:
        data = list(csv.DictReader(f))
    if not data:
        sys.exit(f"{name} has no rows; nothing to plot")
    return data


def save(fig, name):
    out = os.path.join(HERE, name)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(out)


def accuracy():
    data = rows("accuracy.csv")
    knob = data[0]["knob"]
    fig, ax = plt.subplots(figsize=(6, 4))
    for defense in sorted({r["defense"] for r in data}):
        sub = sorted((r for r in data if r["defense"] == defense), key=lambda r: float(r["value"]))
        xs = [float(r["value"]) for r in sub]
        for metric, style in (("robust", "-o"), ("standard", "--s")):
            ys = [float(r[f"{metric}_accuracy"]) for r in sub]
            lo = [float(r[f"{metric}_lo"]) for r in sub]
            hi = [float(r[f"{metric}_hi"]) for r in sub]
            if len(xs) == 1:
                ax.errorbar(xs, ys, yerr=[[max(0.0, y - l) for y, l in zip(ys, lo)], [max(0.0, h - y) for y, h in zip(ys, hi)]],
                            fmt=style[1:], capsize=4, label=f"{defense} {metric}")
            else:
                line, = ax.plot(xs, ys, style, label=f"{defense} {metric}")
                ax.fill_between(xs, lo, hi, color=line.get_color(), alpha=0.2)
    ax.set_xlabel(knob)
    ax.set_ylabel("accuracy (95% Wilson band)")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    save(fig, "accuracy.png")


def trajectories():
    data = rows("trajectories.csv")
    coords = [k for k in data[0] if k.startswith("x")]
    variants = sorted({r["variant"] for r in data})
    fig, axes = plt.subplots(1, len(variants), figsize=(5 * len(variants), 4), squeeze=False)
    for ax, variant in zip(axes[0], variants):
        sub = [r for r in data if r["variant"] == variant]
        for trial in sorted({int(r["trial"]) for r in sub}):
            for phase, color in (("forward", "red"), ("reverse", "pink")):
                path = [r for r in sub if int(r["trial"]) == trial and r["phase"] == phase]
                path.sort(key=lambda r: int(r["step"]))
                if len(coords) == 1:
                    ax.plot([float(r["t"]) for r in path], [float(r["x0"]) for r in path], color=color, lw=1, zorder=2 if phase == "reverse" else 1)
                else:
                    ax.plot([float(r["x0"]) for r in path], [float(r["x1"]) for r in path], color=color, lw=1, zorder=2 if phase == "reverse" else 1)
        if len(coords) == 1:
            ax.set_xscale("log")
            ax.set_xlabel("t")
            ax.set_ylabel("x")
        else:
            ax.set_xlabel("x0")
            ax.set_ylabel("x1")
        ax.set_title(f"{variant}: forward (red), reverse (pink)")
    save(fig, "trajectories.png")


def theorem():
    data = rows("theorem.csv")
    fig, ax = plt.subplots(figsize=(7, 4))
    names = [r["check"] for r in data]
    ps = [float(r["rate"]) for r in data]
    # Wilson edges can sit a rounding error past p at 0 or 1.
    lo = [max(0.0, p - float(r["wilson_lo"])) for p, r in zip(ps, data)]
    hi = [max(0.0, float(r["wilson_hi"]) - p) for p, r in zip(ps, data)]
    ax.bar(range(len(names)), ps, yerr=[lo, hi], capsize=4, color="steelblue")
    for i, r in enumerate(data):
        ax.hlines(float(r["required"]), i - 0.4, i + 0.4, colors="black", linestyles="dashed")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("empirical probability (dashed: required)")
    save(fig, "theorem.png")
    rec = rows("recursion.csv")
    fig, ax = plt.subplots(figsize=(5, 4))
    idx = [int(r["index"]) for r in rec]
    ax.plot(idx, [float(r["epsilon"]) for r in rec], "-o", label="epsilon_i")
    ax.plot(idx, [float(r["delta"]) for r in rec], "-s", label="delta_i")
    ax.set_xlabel("index")
    ax.legend()
    save(fig, "recursion.png")


def probe():
    data = rows("probe.csv")
    sigmas = sorted({float(r["sigma"]) for r in data})
    picks = sigmas[:: max(1, len(sigmas) // 5)]
    fig, ax = plt.subplots(figsize=(6, 4))
    for s in picks:
        sub = sorted((r for r in data if float(r["sigma"]) == s), key=lambda r: float(r["x"]))
        xs = [float(r["x"]) for r in sub]
        line, = ax.plot(xs, [float(r["exact"]) for r in sub], label=f"exact sigma={s:.3g}")
        ax.plot(xs, [float(r["learned"]) for r in sub], "--", color=line.get_color())
    ax.set_xlabel("x")
    ax.set_ylabel("D(x; sigma)  (dashed: learned)")
    ax.legend(fontsize=7)
    save(fig, "probe.png")


def flips():
    fig, ax = plt.subplots(figsize=(4, 4))
    names, rates = [], []
    for name in FILES:
        if name.startswith("fig1_") or name == "purify_trials.csv":
            data = rows(name)
            key = "flipped" if "flipped" in data[0] else None
            if key is None:
                vals = [int(r["start_class"] != r["end_class"]) for r in data]
            else:
                vals = [int(r[key]) for r in data]
            names.append(name.replace(".csv", ""))
            rates.append(sum(vals) / len(vals))
    ax.bar(names, rates, color=["tab:green", "tab:red"][: len(names)])
    ax.set_ylabel("class-flip rate")
    save(fig, "flips.png")


if __name__ == "__main__":
    if KIND == "accuracy":
        accuracy()
    elif KIND == "trajectories":
        trajectories()
        flips()
    elif KIND == "theorem":
        theorem()
    elif KIND == "probe":
        probe()
)PY";

std::string kind_for(const std::string& experiment) {
  if (experiment == "robustness-sweep" || experiment.rfind("ablation-", 0) == 0) return "accuracy";
  if (experiment == "fig1-bimodal" || experiment == "purify-demo") return "trajectories";
  if (experiment == "theorem-verify") return "theorem";
  if (experiment == "train-denoiser") return "probe";
  throw std::runtime_error("no plot recipe for experiment '" + experiment + "'");
}

bool has_rows(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  int n = 0;
  while (n < 2 && std::getline(in, line)) {
    if (!line.empty()) ++n;
  }
  return n >= 2;
}

void replace(std::string& s, const std::string& key, const std::string& value) {
  s.replace(s.find(key), key.size(), value);
}

}  // namespace

std::string emit_plot_script(const std::string& run_dir) {
  const fs::path dir(run_dir);
  std::ifstream in(dir / "summary.json");
  if (!in) throw std::runtime_error("no summary.json in " + run_dir);
  const auto summary = nlohmann::json::parse(in);
  const std::string experiment = summary.at("experiment").get<std::string>();
  const auto files = summary.at("files").get<std::vector<std::string>>();
  if (files.empty()) throw std::runtime_error("run in " + run_dir + " recorded no CSV outputs");
  for (const auto& f : files) {
    if (!fs::exists(dir / f)) throw std::runtime_error("missing CSV " + (dir / f).string());
    if (!has_rows(dir / f)) throw std::runtime_error("CSV " + (dir / f).string() + " has no data rows; refusing to plot");
  }
  std::string script = kScript;
  replace(script, "@KIND@", kind_for(experiment));
  replace(script, "@FILES@", nlohmann::json(files).dump());
  const fs::path out = dir / "plot.py";
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out.string());
  os << script;
  os.close();
  fs::permissions(out, fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec, fs::perm_options::add);
  return out.string();
}

}  // namespace nadd
