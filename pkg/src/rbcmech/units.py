"""Unit system used throughout the package.

Internal base units are chosen so that all simulation quantities stay within
a few orders of magnitude of unity in double precision:

    length   micrometre (um)
    force    piconewton (pN)
    time     millisecond (ms)

Derived internal units:

    energy      pN*um           (= 1e-18 J)
    viscosity   pN*ms/um        (friction coefficient of an edge)
    mass        pN*ms^2/um      (= 1 nanogram)

Public / file-facing units follow the conventions of the single-cell
literature and differ from the internal ones by fixed factors:

    bending modulus kappa_b   1e-19 J        -> * 0.1   = pN*um
    shear modulus mu, K_alpha uN/m           -> * 1.0   = pN/um
    membrane viscosity eta_m  Pa*s*um        -> * 1000  = pN*ms/um
    reported energies         1e-19 J        -> internal pN*um * 10
    dataset times             s              -> * 1000  = ms

All conversion constants live here; no other module hard-codes them.
"""

# pN*um of internal energy per 1e-19 J of reported energy.
KAPPA_E19J_TO_INTERNAL = 0.1

# Reported-energy units (1e-19 J) per pN*um of internal energy.
ENERGY_INTERNAL_TO_E19J = 10.0

# pN/um per uN/m (numerically identity).
MU_UN_PER_M_TO_INTERNAL = 1.0

# pN*ms/um per Pa*s*um.
ETA_PASUM_TO_INTERNAL = 1000.0

SECONDS_TO_MS = 1000.0


def kappa_to_internal(kappa_e19j: float) -> float:
    """Bending modulus in 1e-19 J to internal pN*um."""
    return kappa_e19j * KAPPA_E19J_TO_INTERNAL


def energy_to_e19j(energy_internal: float) -> float:
    """Internal pN*um energy to reported 1e-19 J units."""
    return energy_internal * ENERGY_INTERNAL_TO_E19J


def mu_to_internal(mu_un_per_m: float) -> float:
    """Shear/dilation modulus in uN/m to internal pN/um."""
    return mu_un_per_m * MU_UN_PER_M_TO_INTERNAL


def eta_to_internal(eta_pasum: float) -> float:
    """Membrane viscosity in Pa*s*um to internal pN*ms/um."""
    return eta_pasum * ETA_PASUM_TO_INTERNAL
