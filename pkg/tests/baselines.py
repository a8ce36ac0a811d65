"""Regression baselines frozen from the dense inf-sup solver and the
sine-mode norm proxy (reflected Freudenthal meshes). They are computed
values, not reference data; a change beyond the tolerances below means the
discretisation changed."""

BETA_RTOL = 1e-8
NORM_RTOL = 1e-6

INFSUP_P1 = {
    ("octahedron", "th"): 0.408248290463863,
    ((2, 2), "th"): 0.34933583696891574,
    ((2, 2), "reduced"): 0.24999999999999986,
    ((2, 3), "th"): 0.44789637837117596,
    ((2, 3), "reduced"): 0.29054049087123823,
    ((2, 4), "th"): 0.4743917836665151,
    ((2, 4), "reduced"): 0.3231127653507241,
    ((3, 2), "th"): 0.2654126094416163,
    ((3, 2), "reduced"): 0.18914397144114597,
    ((3, 3), "th"): 0.3301395764734572,
    ((3, 3), "reduced"): 0.21105888209836687,
    ((3, 4), "th"): 0.36298771761677145,
    ((3, 4), "reduced"): 0.24264630369286566,
}

# sqrt of the largest |grad Pi v|^2 / |grad v|^2 over sine modes up to frequency 6N
NORM_PROXY_TH_2D = {2: 2.25515047006389, 3: 2.2790096416202137, 4: 2.201742134354904}
