def tank_head_without_pump(en):
    en.setLinkInitialStatus(en.getLinkIndex("9"), 0)
    hyd = en.getComputedHydraulicTimeSeries()
    step = list(hyd.Time).index(12 * 3600)
    return float(hyd.Head[step, en.getNodeIndex("2") - 1])

result = tank_head_without_pump(en)
