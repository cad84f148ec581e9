# Este arquivo pode ficar vazio.
# Ele apenas sinaliza ao Python que 'views' é um pacote.
