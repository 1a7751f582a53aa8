import json

import numpy as np

from config import settings

print("🔄 Regenerating the bundled FMO network...")

# Adolphs & Renger (2006), C. tepidum, site energies in cm^-1
site_energies = {
    'BChl1': 12410.0,
    'BChl2': 12530.0,
    'BChl3': 12210.0,
    'BChl4': 12320.0,
    'BChl5': 12480.0,
    'BChl6': 12630.0,
    'BChl7': 12440.0,
}

# Upper triangle of the dipole-dipole couplings (cm^-1)
couplings = {
    ('BChl1', 'BChl2'): -87.7, ('BChl1', 'BChl3'): 5.5, ('BChl1', 'BChl4'): -5.9,
    ('BChl1', 'BChl5'): 6.7, ('BChl1', 'BChl6'): -13.7, ('BChl1', 'BChl7'): -9.9,
    ('BChl2', 'BChl3'): 30.8, ('BChl2', 'BChl4'): 8.2, ('BChl2', 'BChl5'): 0.7,
    ('BChl2', 'BChl6'): 11.8, ('BChl2', 'BChl7'): 4.3,
    ('BChl3', 'BChl4'): -53.5, ('BChl3', 'BChl5'): -2.2, ('BChl3', 'BChl6'): -9.6,
    ('BChl3', 'BChl7'): 6.0,
    ('BChl4', 'BChl5'): -70.7, ('BChl4', 'BChl6'): -17.0, ('BChl4', 'BChl7'): -63.3,
    ('BChl5', 'BChl6'): 81.1, ('BChl5', 'BChl7'): -1.3,
    ('BChl6', 'BChl7'): 39.7,
}

# Donor BChl1 and acceptor BChl3 first, the sink last
order = ['BChl1', 'BChl3', 'BChl2', 'BChl4', 'BChl5', 'BChl6', 'BChl7']
reference = site_energies['BChl3']

n = len(order) + 1
hamiltonian = np.zeros((n, n))
for i, a in enumerate(order):
    hamiltonian[i, i] = site_energies[a] - reference
    for j, b in enumerate(order):
        if (a, b) in couplings:
            hamiltonian[i, j] = hamiltonian[j, i] = couplings[(a, b)]

# The donor does not couple to the acceptor directly
hamiltonian[0, 1] = hamiltonian[1, 0] = 0.0
hamiltonian[-1, -1] = settings.OPTIMUM_SINK_ENERGY

document = {
    'label': 'FMO C. tepidum (Adolphs-Renger 2006)',
    'n_pigments': len(order),
    'site_labels': '@LABELS@',
    'energy_unit': 'cm^-1',
    'energy_reference': reference,
    'hamiltonian': '@HAMILTONIAN@',
    'provenance': {
        'source': 'J. Adolphs and T. Renger, Biophys. J. 91, 2778 (2006), '
                  'Chlorobaculum tepidum site energies and couplings',
        'site_order': 'donor BChl1, acceptor BChl3, bath BChl2, BChl4, BChl5, BChl6, BChl7, then the sink',
        'energy_reference': 'site energies are given relative to 12210 cm^-1 (BChl3)',
        'modifications': [
            'h(BChl1, BChl3) = 5.5 cm^-1 set to 0 (donor and acceptor are not directly coupled)',
            'sink row and column are zero; the acceptor-sink coupling, sink energy and sink rate '
            'are model parameters',
            'sink diagonal holds the default sink energy -500 cm^-1 and is replaced by the sink '
            'parameters in use',
        ],
        'generated_by': 'update_data.py',
    },
}

# one matrix row per line
rows = ',\n'.join('    ' + json.dumps([float(x) for x in row]) for row in hamiltonian)
text = json.dumps(document, indent=2, ensure_ascii=False)
text = text.replace('"@HAMILTONIAN@"', '[\n' + rows + '\n  ]')
text = text.replace('"@LABELS@"', json.dumps(order + ['sink']))

with open(settings.FMO_DATASET, 'w') as f:
    f.write(text + '\n')
print(f'✅ Wrote {n}x{n} Hamiltonian to {settings.FMO_DATASET}')
print('✅ Data updated successfully!')
