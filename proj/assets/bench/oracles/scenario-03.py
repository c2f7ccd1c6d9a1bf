def tank_head_without_pump(en):
    en.setLinkInitialStatus(en.getLinkIndex("335"), 0)
    hyd = en.getComputedHydraulicTimeSeries()
    return float(hyd.Head[:, en.getNodeIndex("1") - 1].min())

result = tank_head_without_pump(en)
