V_MIN = 0.95
V_MAX = 1.05
V_SUBSTATION = 1.03

PV_PENALTY_WEIGHT = 100.0
DER_RATING_SHARE = 0.42
GFI_RATING_SCALE = 10.0
