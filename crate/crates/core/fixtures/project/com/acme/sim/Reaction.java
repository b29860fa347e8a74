package com.acme.sim;

public class Reaction {
    private final String name;

    public Reaction(String name) {
        this.name = name;
    }

    public boolean willReact() {
        return name.length() > 0;
    }

    public void react(Observer observer) {
        observer.onReact(name);
    }

    public String getName() {
        return name;
    }
}

interface Observer {
    void onReact(String name);
}
