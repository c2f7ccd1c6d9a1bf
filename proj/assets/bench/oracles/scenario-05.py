def flow_with_larger_pipe(en):
    link = en.getLinkIndex("111")
    en.setLinkDiameter(link, 18)
    hyd = en.getComputedHydraulicTimeSeries()
    return float(hyd.Flow[:, link - 1].max())

result = flow_with_larger_pipe(en)
