def final_head_with_new_level(en):
    tank = en.getNodeIndex("2")
    en.setNodeTankInitialLevel(tank, 100)
    hyd = en.getComputedHydraulicTimeSeries()
    return float(hyd.Head[-1, tank - 1])

result = final_head_with_new_level(en)
