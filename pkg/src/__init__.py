# Pacote principal: objetivo QDF, modelo linear, fluxo bilevel, dados e diagnósticos.
