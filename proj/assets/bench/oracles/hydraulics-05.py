def peak_pump_flow(en):
    hyd = en.getComputedHydraulicTimeSeries()
    column = en.getLinkIndex("10") - 1
    return float(hyd.Flow[:, column].max())

result = peak_pump_flow(en)
