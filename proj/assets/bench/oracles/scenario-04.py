def pressure_with_valve_closed(en):
    en.setLinkInitialStatus(en.getLinkIndex("PRV-1"), 0)
    hyd = en.getComputedHydraulicTimeSeries()
    return float(hyd.Pressure[:, en.getNodeIndex("n1") - 1].min())

result = pressure_with_valve_closed(en)
