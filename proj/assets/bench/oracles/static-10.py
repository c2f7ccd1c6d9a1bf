def tank_id(en):
    return list(en.getNodeTankNameID())

result = tank_id(en)
