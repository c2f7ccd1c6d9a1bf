def pressure_with_higher_demand(en):
    junctions = list(en.getNodeJunctionIndex())
    for i in junctions:
        en.setNodeBaseDemands(i, 1.2 * en.getNodeBaseDemands(i)[1])
    hyd = en.getComputedHydraulicTimeSeries()
    return float(min(hyd.Pressure[:, i - 1].min() for i in junctions))

result = pressure_with_higher_demand(en)
