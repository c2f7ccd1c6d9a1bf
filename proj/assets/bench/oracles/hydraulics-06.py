def max_velocity(en):
    hyd = en.getComputedHydraulicTimeSeries()
    pipes = [i - 1 for i in en.getLinkPipeIndex()]
    return float(hyd.Velocity[:, pipes].max())

result = max_velocity(en)
