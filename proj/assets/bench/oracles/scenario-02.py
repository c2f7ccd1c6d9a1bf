def min_pressure_with_double_demand(en):
    node = en.getNodeIndex("22")
    en.setNodeBaseDemands(node, 2 * en.getNodeBaseDemands(node)[1])
    hyd = en.getComputedHydraulicTimeSeries()
    return float(hyd.Pressure[:, node - 1].min())

result = min_pressure_with_double_demand(en)
