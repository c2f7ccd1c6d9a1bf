def velocity_with_narrow_pipe(en):
    link = en.getLinkIndex("20")
    en.setLinkDiameter(link, en.getLinkDiameter(link) / 2)
    hyd = en.getComputedHydraulicTimeSeries()
    return float(hyd.Velocity[:, link - 1].max())

result = velocity_with_narrow_pipe(en)
