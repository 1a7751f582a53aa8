"""
Figures from the result files written by fmo_resonance.py

    python plot_figures.py [--results-dir ./results] [--show]

Plots whatever of spectra.csv, sweep.csv and tempsweep.csv is present.
"""
import argparse
from pathlib import Path

import matplotlib
import numpy as np
import pandas as pd

from config import settings


def plot_spectra(frame: pd.DataFrame, ax_rates, ax_density):
    ax_rates.plot(frame['omega'], frame['gamma1'], label='γ₁(ω)')
    ax_rates.plot(frame['omega'], frame['gamma2'], label='γ₂(ω)')
    ax_rates.plot(frame['omega'], frame['delta1'], '--', label='δ₁(ω)')
    ax_rates.plot(frame['omega'], frame['delta2'], '--', label='δ₂(ω)')
    ax_rates.set_ylabel('cm⁻¹')
    ax_rates.legend()

    ax_density.plot(frame['omega'], frame['f1'], label='f₁ (donor)')
    ax_density.plot(frame['omega'], frame['f2'], label='f₂ (acceptor)')
    ax_density.fill_between(frame['omega'], frame['sqrt_f1f2'], alpha=0.3, label='√(f₁f₂)')
    ax_density.set_xlabel('ω (cm⁻¹)')
    ax_density.set_ylabel('density (1/cm⁻¹)')
    ax_density.legend()


def plot_sweep(frame: pd.DataFrame, ax):
    h28 = np.unique(frame['h28'])
    omega8 = np.unique(frame['omega8'])
    values = frame.pivot(index='h28', columns='omega8', values='F').reindex(index=h28, columns=omega8)
    mesh = ax.pcolormesh(omega8, h28, values.to_numpy(), shading='auto', cmap='viridis', vmin=0.0)
    ax.contour(omega8, h28, values.to_numpy(), levels=[0.5, 0.6, 0.7], colors='white', linewidths=0.8)
    ridge = np.linspace(0.0, h28.max(), 2)
    ax.plot(-1.5 * ridge, ridge, 'w:', label='|ω₈| = 1.5 h₂₈')
    ax.set_xlim(omega8.min(), omega8.max())
    ax.set_xlabel('ω₈ (cm⁻¹)')
    ax.set_ylabel('h₂₈ (cm⁻¹)')
    ax.legend(loc='upper right')
    return mesh


def plot_temperature(frame: pd.DataFrame, ax):
    ok = ~frame['failed'].astype(bool)
    ax.semilogx(frame['temperature'][ok], frame['F'][ok], 'o-')
    ax.axvline(settings.REFERENCE_TEMPERATURE, color='gray', linestyle=':')
    ax.set_xlabel('T (K)')
    ax.set_ylabel('𝓕')


def main():
    parser = argparse.ArgumentParser(description='Plot FMO resonance results')
    parser.add_argument('--results-dir', default=settings.OUTPUT_DIRECTORY)
    parser.add_argument('--show', action='store_true')
    args = parser.parse_args()
    if not args.show:
        matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    results = Path(args.results_dir)
    written = 0

    spectra = results / 'spectra.csv'
    if spectra.exists():
        fig, (ax_rates, ax_density) = plt.subplots(nrows=2, ncols=1, figsize=(8, 7), sharex=True)
        plot_spectra(pd.read_csv(spectra, comment='#'), ax_rates, ax_density)
        plt.tight_layout()
        fig.savefig(results / 'spectra.png', dpi=200)
        print(f'✅ Wrote {results / "spectra.png"}')
        written += 1

    sweep = results / 'sweep.csv'
    if sweep.exists():
        fig, ax = plt.subplots(figsize=(7, 5))
        mesh = plot_sweep(pd.read_csv(sweep, comment='#'), ax)
        fig.colorbar(mesh, ax=ax, label='𝓕')
        plt.tight_layout()
        fig.savefig(results / 'sweep.png', dpi=200)
        print(f'✅ Wrote {results / "sweep.png"}')
        written += 1

    tempsweep = results / 'tempsweep.csv'
    if tempsweep.exists():
        fig, ax = plt.subplots(figsize=(7, 4))
        plot_temperature(pd.read_csv(tempsweep, comment='#'), ax)
        plt.tight_layout()
        fig.savefig(results / 'tempsweep.png', dpi=200)
        print(f'✅ Wrote {results / "tempsweep.png"}')
        written += 1

    if not written:
        print(f'⚠️ No result files in {results}; run fmo_resonance.py spectra, sweep or tempsweep first')
    elif args.show:
        plt.show()


if __name__ == '__main__':
    main()
