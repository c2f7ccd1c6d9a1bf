def max_pressure_with_pipe_closed(en):
    en.setLinkInitialStatus(en.getLinkIndex("10"), 0)
    hyd = en.getComputedHydraulicTimeSeries()
    return float(hyd.Pressure.max())

result = max_pressure_with_pipe_closed(en)
