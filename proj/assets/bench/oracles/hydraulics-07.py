def total_demand_at_noon(en):
    hyd = en.getComputedHydraulicTimeSeries()
    step = list(hyd.Time).index(12 * 3600)
    junctions = [i - 1 for i in en.getNodeJunctionIndex()]
    return float(hyd.Demand[step, junctions].sum())

result = total_demand_at_noon(en)
