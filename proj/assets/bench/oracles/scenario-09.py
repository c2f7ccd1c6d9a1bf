def pressure_with_rough_pipes(en):
    for i in en.getLinkPipeIndex():
        en.setLinkRoughnessCoeff(i, 80)
    hyd = en.getComputedHydraulicTimeSeries()
    return float(min(hyd.Pressure[:, i - 1].min() for i in en.getNodeJunctionIndex()))

result = pressure_with_rough_pipes(en)
